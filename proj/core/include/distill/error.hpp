#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace distill {

// Base for every error raised by the library. The CLI maps subclasses onto
// exit codes, so keep the hierarchy flat.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration value; `field` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& what)
      : Error("config error [" + field + "]: " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Caller passed inputs that violate an operation's precondition.
class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error("input error: " + what) {}
};

class DegenerateGeometryError : public InputError {
 public:
  explicit DegenerateGeometryError(const std::string& what)
      : InputError("degenerate geometry: " + what) {}
};

// Versioned file with the wrong header.
class FormatError : public Error {
 public:
  FormatError(std::string expected, std::string found, const std::string& what)
      : Error("format error: " + what + " (expected " + expected + ", found " + found + ")"),
        expected_(std::move(expected)),
        found_(std::move(found)) {}
  const std::string& expected() const noexcept { return expected_; }
  const std::string& found() const noexcept { return found_; }

 private:
  std::string expected_;
  std::string found_;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("parse error at line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IntegrityError : public Error {
 public:
  explicit IntegrityError(const std::string& what) : Error("integrity error: " + what) {}
};

// Non-finite values during optimization.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error("numeric error: " + what) {}
};

class HarnessError : public Error {
 public:
  explicit HarnessError(const std::string& what) : Error("harness error: " + what) {}
};

}  // namespace distill
