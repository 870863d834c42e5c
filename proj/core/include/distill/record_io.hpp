#pragma once

// Versioned line-delimited JSON records: a header line
// {"format": ..., "version": ...} followed by one JSON object per line.

#include <nlohmann/json.hpp>

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>

namespace distill::io {

using nlohmann::json;

class RecordWriter {
 public:
  RecordWriter(const std::filesystem::path& path, const std::string& format, int version,
               bool append = false);
  void write(const json& record);
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

// Calls `visit(record, line_number)` for each record after validating the
// header. Throws FormatError on header mismatch, ParseError on bad lines.
void read_records(const std::filesystem::path& path, const std::string& format, int version,
                  const std::function<void(const json&, std::size_t)>& visit);

// Header of an existing file without consuming records.
json read_header(const std::filesystem::path& path);

}  // namespace distill::io
