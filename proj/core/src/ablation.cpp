#include "distill/ablation.hpp"

#include "distill/error.hpp"
#include "distill/record_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>

namespace distill {

using nlohmann::json;

namespace {

constexpr std::array<const char*, kRewardCount> kRewardKeys{
    "state", "traj_mean", "traj_start", "traj_end", "speed_gate", "consistency", "collision"};

auto toggle_tuple(const AblationSpec& s) {
  return std::make_tuple(s.toggles.rl, s.toggles.kd, s.toggles.generative, s.kd.encoder, s.kd.decoder, s.kd.cls,
                         s.kd.reg, s.rewards);
}

json spec_json(const AblationSpec& s) {
  json rewards;
  for (int i = 0; i < kRewardCount; ++i) rewards[kRewardKeys[i]] = s.rewards[i];
  return {{"id", s.id},
          {"toggles", {{"rl", s.toggles.rl}, {"kd", s.toggles.kd}, {"generative", s.toggles.generative}}},
          {"kd", {{"encoder", s.kd.encoder}, {"decoder", s.kd.decoder}, {"cls", s.kd.cls}, {"reg", s.kd.reg}}},
          {"rewards", rewards}};
}

AblationSpec spec_from_json(const json& j) {
  // Reuse the config parser so unknown keys are rejected the same way.
  json cfg = json::object();
  for (const char* section : {"toggles", "kd", "rewards"})
    if (j.contains(section)) cfg[section] = j.at(section);
  for (const auto& [k, v] : j.items())
    if (k != "id" && k != "toggles" && k != "kd" && k != "rewards") throw ConfigError("matrix.rows." + k, "unknown key");
  const TrainingConfig c = config_from_json(cfg);
  AblationSpec s;
  if (!j.contains("id") || !j.at("id").is_string() || j.at("id").get<std::string>().empty())
    throw ConfigError("matrix.rows.id", "every row needs a non-empty string id");
  s.id = j.at("id").get<std::string>();
  s.toggles = c.toggles;
  s.kd = c.kd;
  s.rewards = c.rewards;
  return s;
}

}  // namespace

AblationMatrix matrix_from_json(const json& j) {
  if (!j.is_object() || !j.contains("rows") || !j.at("rows").is_array())
    throw ConfigError("matrix.rows", "matrix needs a rows array");
  AblationMatrix m;
  for (const json& r : j.at("rows")) m.rows.push_back(spec_from_json(r));
  if (j.contains("seeds")) {
    try {
      m.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    } catch (const json::exception&) {
      throw ConfigError("matrix.seeds", "seeds must be non-negative integers");
    }
  }
  if (m.seeds.empty()) m.seeds.push_back(0);
  for (const auto& [k, v] : j.items())
    if (k != "rows" && k != "seeds") throw ConfigError("matrix." + k, "unknown key");
  return m;
}

AblationMatrix read_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--matrix", "cannot open " + path.string());
  try {
    return matrix_from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("--matrix", std::string("malformed JSON: ") + e.what());
  }
}

std::string make_run_id(const AblationSpec& spec, std::uint64_t seed) {
  return spec.id + "/seed" + std::to_string(seed);
}

json to_json(const AblationRow& row) {
  const OpenLoopReport& r = row.report;
  return {{"run_id", row.run_id},
          {"spec", spec_json(row.spec)},
          {"seed", row.seed},
          {"scenes", r.scenes},
          {"l2_1s", r.l2[0]},
          {"l2_2s", r.l2[1]},
          {"l2_3s", r.l2[2]},
          {"l2_avg", r.l2_avg},
          {"collision_1s", r.collision[0]},
          {"collision_2s", r.collision[1]},
          {"collision_3s", r.collision[2]},
          {"collision_avg", r.collision_avg}};
}

AblationRow ablation_row_from_json(const json& j) {
  AblationRow row;
  row.run_id = j.at("run_id").get<std::string>();
  row.spec = spec_from_json(j.at("spec"));
  row.seed = j.at("seed").get<std::uint64_t>();
  OpenLoopReport& r = row.report;
  r.scenes = j.at("scenes").get<int>();
  r.l2 = {j.at("l2_1s").get<double>(), j.at("l2_2s").get<double>(), j.at("l2_3s").get<double>()};
  r.l2_avg = j.at("l2_avg").get<double>();
  r.collision = {j.at("collision_1s").get<double>(), j.at("collision_2s").get<double>(),
                 j.at("collision_3s").get<double>()};
  r.collision_avg = j.at("collision_avg").get<double>();
  return row;
}

void append_report_rows(const std::vector<AblationRow>& rows, const std::filesystem::path& path) {
  io::RecordWriter w(path, kReportFormat, kReportVersion, std::filesystem::exists(path));
  for (const AblationRow& r : rows) w.write(to_json(r));
}

std::vector<AblationRow> read_report(const std::filesystem::path& path) {
  std::vector<AblationRow> rows;
  io::read_records(path, kReportFormat, kReportVersion, [&](const json& rec, std::size_t line) {
    try {
      rows.push_back(ablation_row_from_json(rec));
    } catch (const json::exception& e) {
      throw ParseError(line, e.what());
    }
  });
  return rows;
}

void sort_rows(std::vector<AblationRow>& rows) {
  std::stable_sort(rows.begin(), rows.end(), [](const AblationRow& a, const AblationRow& b) {
    const auto ta = toggle_tuple(a.spec);
    const auto tb = toggle_tuple(b.spec);
    if (ta != tb) return ta < tb;
    return a.seed < b.seed;
  });
}

std::string render_table(const std::vector<AblationRow>& rows) {
  std::ostringstream out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-24s %6s %3s %3s %3s %8s %8s %8s %8s %8s %8s %8s %8s\n", "run", "seed", "RL",
                "KD", "GEN", "L2@1s", "L2@2s", "L2@3s", "L2avg", "Col@1s", "Col@2s", "Col@3s", "Colavg");
  out << buf;
  for (const AblationRow& r : rows) {
    const OpenLoopReport& o = r.report;
    std::snprintf(buf, sizeof buf, "%-24s %6llu %3s %3s %3s %8.4f %8.4f %8.4f %8.4f %8.2f %8.2f %8.2f %8.2f\n",
                  r.spec.id.c_str(), static_cast<unsigned long long>(r.seed), r.spec.toggles.rl ? "on" : "-",
                  r.spec.toggles.kd ? "on" : "-", r.spec.toggles.generative ? "on" : "-", o.l2[0], o.l2[1], o.l2[2],
                  o.l2_avg, o.collision[0], o.collision[1], o.collision[2], o.collision_avg);
    out << buf;
  }
  return out.str();
}

std::vector<AblationRow> run_ablation(const AblationMatrix& matrix, const std::vector<Scene>& train_scenes,
                                      const std::vector<Scene>& eval_scenes, const Planner& teacher,
                                      const TrainingConfig& base, const std::filesystem::path& report_path,
                                      std::ostream* log) {
  std::set<std::string> ids;
  for (const AblationSpec& s : matrix.rows)
    if (!ids.insert(s.id).second) throw HarnessError("duplicate run identifier '" + s.id + "'");
  std::set<std::uint64_t> seeds(matrix.seeds.begin(), matrix.seeds.end());
  if (seeds.size() != matrix.seeds.size()) throw HarnessError("duplicate seed in the ablation matrix");

  std::vector<AblationRow> done;
  if (std::filesystem::exists(report_path)) done = read_report(report_path);

  std::vector<AblationRow> rows;
  for (const AblationSpec& spec : matrix.rows) {
    for (std::uint64_t seed : matrix.seeds) {
      const std::string run_id = make_run_id(spec, seed);
      const auto it = std::find_if(done.begin(), done.end(), [&](const AblationRow& r) { return r.run_id == run_id; });
      if (it != done.end()) {
        if (log) *log << "skip " << run_id << ": already in " << report_path.string() << '\n';
        rows.push_back(*it);
        continue;
      }
      TrainingConfig c = base;
      c.toggles = spec.toggles;
      c.kd = spec.kd;
      c.rewards = spec.rewards;
      c.seed = seed;
      if (log) *log << "run " << run_id << '\n';
      const TrainResult trained = train_student(train_scenes, teacher, c);
      AblationRow row{run_id, spec, seed, evaluate(*trained.model, eval_scenes, c, derive_seed(seed, 0xe7a1))};
      append_report_rows({row}, report_path);
      rows.push_back(std::move(row));
    }
  }
  sort_rows(rows);
  return rows;
}

}  // namespace distill
