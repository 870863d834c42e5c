#pragma once

#include "distill/metrics.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace distill {

inline constexpr const char* kReportFormat = "distill-report";
inline constexpr int kReportVersion = 1;

struct AblationSpec {
  std::string id;
  Toggles toggles;
  KdFlags kd;
  std::array<bool, kRewardCount> rewards{true, true, true, true, true, true, true};

  bool operator==(const AblationSpec&) const = default;
};

struct AblationMatrix {
  std::vector<AblationSpec> rows;
  std::vector<std::uint64_t> seeds;
};

// {"seeds": [...], "rows": [{"id": ..., "toggles": {...}, "kd": {...}, "rewards": {...}}]}
// Omitted toggles, KD flags and rewards take the config defaults.
AblationMatrix matrix_from_json(const nlohmann::json& j);
AblationMatrix read_matrix(const std::filesystem::path& path);

struct AblationRow {
  std::string run_id;
  AblationSpec spec;
  std::uint64_t seed = 0;
  OpenLoopReport report;

  bool operator==(const AblationRow&) const = default;
};

std::string make_run_id(const AblationSpec& spec, std::uint64_t seed);

nlohmann::json to_json(const AblationRow& row);
AblationRow ablation_row_from_json(const nlohmann::json& j);
void append_report_rows(const std::vector<AblationRow>& rows, const std::filesystem::path& path);
std::vector<AblationRow> read_report(const std::filesystem::path& path);

// Sorted by toggle tuple, then seed.
void sort_rows(std::vector<AblationRow>& rows);
std::string render_table(const std::vector<AblationRow>& rows);

// Trains a student per (row, seed) and evaluates it on `eval_scenes`, appending
// each result to `report_path`. Runs already present in the report are skipped
// with a notice on `log`. Duplicate row ids raise HarnessError.
std::vector<AblationRow> run_ablation(const AblationMatrix& matrix, const std::vector<Scene>& train_scenes,
                                      const std::vector<Scene>& eval_scenes, const Planner& teacher,
                                      const TrainingConfig& base, const std::filesystem::path& report_path,
                                      std::ostream* log = nullptr);

}  // namespace distill
