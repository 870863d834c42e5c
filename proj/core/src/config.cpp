#include "distill/config.hpp"

#include "distill/error.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>

extern char** environ;

namespace distill {

using nlohmann::json;

namespace {

constexpr std::array<const char*, kRewardCount> kRewardNames{
    "state", "traj_mean", "traj_start", "traj_end", "speed_gate", "consistency", "collision"};

// Copies j[key] into `out` when present; rejects values of the wrong type.
template <typename T>
void read(const json& j, const std::string& section, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(section + "." + key, "wrong type: " + j.at(key).dump());
  }
}

void reject_unknown(const json& j, const std::string& section, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(section, "must be an object");
  for (const auto& [k, v] : j.items()) {
    if (std::none_of(keys.begin(), keys.end(), [&](const char* x) { return k == x; }))
      throw ConfigError(section.empty() ? k : section + "." + k, "unknown key");
  }
}

}  // namespace

void ModelConfig::validate() const {
  if (dim <= 0 || dim % 2 != 0) throw ConfigError("model.dim", "must be positive and even");
  if (heads <= 0 || dim % heads != 0) throw ConfigError("model.heads", "must divide model.dim");
  if (ffn_hidden <= 0) throw ConfigError("model.ffn_hidden", "must be positive");
  if (memory_frames <= 0) throw ConfigError("model.memory_frames", "must be positive");
  if (latent_dim <= 0) throw ConfigError("model.latent_dim", "must be positive");
  if (levels <= 0 || dim % levels != 0) throw ConfigError("model.levels", "must divide model.dim");
  if (conv_channels <= 0) throw ConfigError("model.conv_channels", "must be positive");
  if (q_hidden <= 0) throw ConfigError("model.q_hidden", "must be positive");
}

void NoiseSpec::validate() const {
  if (!(position_sigma >= 0.0)) throw ConfigError("noise.position_sigma", "must be non-negative");
  if (!(yaw_sigma >= 0.0)) throw ConfigError("noise.yaw_sigma", "must be non-negative");
  if (!(dropout >= 0.0 && dropout <= 1.0)) throw ConfigError("noise.dropout", "must lie in [0, 1]");
}

void TrainingConfig::validate() const {
  if (!(kd_weight >= 0.0)) throw ConfigError("training.kd_weight", "must be non-negative");
  if (!(ds_weight >= 0.0)) throw ConfigError("training.ds_weight", "must be non-negative");
  if (!(rl_weight >= 0.0)) throw ConfigError("training.rl_weight", "must be non-negative");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("training.gamma", "must lie in [0, 1)");
  if (!(zeta >= 0.0)) throw ConfigError("training.zeta", "must be non-negative");
  if (!(learning_rate > 0.0)) throw ConfigError("training.learning_rate", "must be positive");
  if (!(min_learning_rate_ratio >= 0.0 && min_learning_rate_ratio <= 1.0))
    throw ConfigError("training.min_learning_rate_ratio", "must lie in [0, 1]");
  if (!(warmup_fraction >= 0.0 && warmup_fraction < 1.0))
    throw ConfigError("training.warmup_fraction", "must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("training.weight_decay", "must be non-negative");
  if (!(grad_clip >= 0.0)) throw ConfigError("training.grad_clip", "must be non-negative");
  if (teacher_epochs < 0) throw ConfigError("training.teacher_epochs", "must be non-negative");
  if (student_epochs < 0) throw ConfigError("training.student_epochs", "must be non-negative");
  if (batch_size <= 0) throw ConfigError("training.batch_size", "must be positive");
  if (threads < 0) throw ConfigError("training.threads", "must be non-negative");
  generator.validate();
  model.validate();
  noise.validate();
  if (vocabulary.mode_count < 2) throw ConfigError("vocabulary.mode_count", "must be at least 2");
  if (vocabulary.soft_neighbors < 0 || vocabulary.soft_neighbors >= vocabulary.mode_count)
    throw ConfigError("vocabulary.soft_neighbors", "must lie in [0, mode_count)");
}

json to_json(const TrainingConfig& c) {
  json rewards;
  for (int i = 0; i < kRewardCount; ++i) rewards[kRewardNames[i]] = c.rewards[i];
  return {
      {"training",
       {{"kd_weight", c.kd_weight},
        {"ds_weight", c.ds_weight},
        {"rl_weight", c.rl_weight},
        {"gamma", c.gamma},
        {"zeta", c.zeta},
        {"learning_rate", c.learning_rate},
        {"min_learning_rate_ratio", c.min_learning_rate_ratio},
        {"warmup_fraction", c.warmup_fraction},
        {"weight_decay", c.weight_decay},
        {"grad_clip", c.grad_clip},
        {"teacher_epochs", c.teacher_epochs},
        {"student_epochs", c.student_epochs},
        {"batch_size", c.batch_size},
        {"seed", c.seed},
        {"threads", c.threads}}},
      {"toggles", {{"rl", c.toggles.rl}, {"kd", c.toggles.kd}, {"generative", c.toggles.generative}}},
      {"kd", {{"encoder", c.kd.encoder}, {"decoder", c.kd.decoder}, {"cls", c.kd.cls}, {"reg", c.kd.reg}}},
      {"rewards", rewards},
      {"generator",
       {{"agent_count", c.generator.agent_count},
        {"lane_count", c.generator.lane_count},
        {"min_speed", c.generator.min_speed},
        {"max_speed", c.generator.max_speed},
        {"max_accel", c.generator.max_accel},
        {"turn_probability", c.generator.turn_probability},
        {"ego_length", c.generator.ego_length},
        {"ego_width", c.generator.ego_width}}},
      {"model",
       {{"dim", c.model.dim},
        {"heads", c.model.heads},
        {"ffn_hidden", c.model.ffn_hidden},
        {"memory_frames", c.model.memory_frames},
        {"latent_dim", c.model.latent_dim},
        {"levels", c.model.levels},
        {"conv_channels", c.model.conv_channels},
        {"q_hidden", c.model.q_hidden}}},
      {"vocabulary",
       {{"mode_count", c.vocabulary.mode_count},
        {"soft_neighbors", c.vocabulary.soft_neighbors},
        {"seed", c.vocabulary.seed}}},
      {"noise",
       {{"position_sigma", c.noise.position_sigma}, {"yaw_sigma", c.noise.yaw_sigma}, {"dropout", c.noise.dropout}}},
  };
}

TrainingConfig config_from_json(const json& j) {
  TrainingConfig c;
  reject_unknown(j, "", {"training", "toggles", "kd", "rewards", "generator", "model", "vocabulary", "noise"});
  if (j.contains("training")) {
    const json& t = j["training"];
    reject_unknown(t, "training",
                   {"kd_weight", "ds_weight", "rl_weight", "gamma", "zeta", "learning_rate",
                    "min_learning_rate_ratio", "warmup_fraction", "weight_decay", "grad_clip", "teacher_epochs", "student_epochs",
                    "batch_size", "seed", "threads"});
    read(t, "training", "kd_weight", c.kd_weight);
    read(t, "training", "ds_weight", c.ds_weight);
    read(t, "training", "rl_weight", c.rl_weight);
    read(t, "training", "gamma", c.gamma);
    read(t, "training", "zeta", c.zeta);
    read(t, "training", "learning_rate", c.learning_rate);
    read(t, "training", "min_learning_rate_ratio", c.min_learning_rate_ratio);
    read(t, "training", "warmup_fraction", c.warmup_fraction);
    read(t, "training", "weight_decay", c.weight_decay);
    read(t, "training", "grad_clip", c.grad_clip);
    read(t, "training", "teacher_epochs", c.teacher_epochs);
    read(t, "training", "student_epochs", c.student_epochs);
    read(t, "training", "batch_size", c.batch_size);
    read(t, "training", "seed", c.seed);
    read(t, "training", "threads", c.threads);
  }
  if (j.contains("toggles")) {
    const json& t = j["toggles"];
    reject_unknown(t, "toggles", {"rl", "kd", "generative"});
    read(t, "toggles", "rl", c.toggles.rl);
    read(t, "toggles", "kd", c.toggles.kd);
    read(t, "toggles", "generative", c.toggles.generative);
  }
  if (j.contains("kd")) {
    const json& t = j["kd"];
    reject_unknown(t, "kd", {"encoder", "decoder", "cls", "reg"});
    read(t, "kd", "encoder", c.kd.encoder);
    read(t, "kd", "decoder", c.kd.decoder);
    read(t, "kd", "cls", c.kd.cls);
    read(t, "kd", "reg", c.kd.reg);
  }
  if (j.contains("rewards")) {
    const json& t = j["rewards"];
    reject_unknown(t, "rewards", {"state", "traj_mean", "traj_start", "traj_end", "speed_gate", "consistency", "collision"});
    for (int i = 0; i < kRewardCount; ++i) {
      bool v = c.rewards[i];
      read(t, "rewards", kRewardNames[i], v);
      c.rewards[i] = v;
    }
  }
  if (j.contains("generator")) {
    const json& t = j["generator"];
    reject_unknown(t, "generator",
                   {"agent_count", "lane_count", "min_speed", "max_speed", "max_accel", "turn_probability",
                    "ego_length", "ego_width"});
    read(t, "generator", "agent_count", c.generator.agent_count);
    read(t, "generator", "lane_count", c.generator.lane_count);
    read(t, "generator", "min_speed", c.generator.min_speed);
    read(t, "generator", "max_speed", c.generator.max_speed);
    read(t, "generator", "max_accel", c.generator.max_accel);
    read(t, "generator", "turn_probability", c.generator.turn_probability);
    read(t, "generator", "ego_length", c.generator.ego_length);
    read(t, "generator", "ego_width", c.generator.ego_width);
  }
  if (j.contains("model")) {
    const json& t = j["model"];
    reject_unknown(t, "model",
                   {"dim", "heads", "ffn_hidden", "memory_frames", "latent_dim", "levels", "conv_channels", "q_hidden"});
    read(t, "model", "dim", c.model.dim);
    read(t, "model", "heads", c.model.heads);
    read(t, "model", "ffn_hidden", c.model.ffn_hidden);
    read(t, "model", "memory_frames", c.model.memory_frames);
    read(t, "model", "latent_dim", c.model.latent_dim);
    read(t, "model", "levels", c.model.levels);
    read(t, "model", "conv_channels", c.model.conv_channels);
    read(t, "model", "q_hidden", c.model.q_hidden);
  }
  if (j.contains("vocabulary")) {
    const json& t = j["vocabulary"];
    reject_unknown(t, "vocabulary", {"mode_count", "soft_neighbors", "seed"});
    read(t, "vocabulary", "mode_count", c.vocabulary.mode_count);
    read(t, "vocabulary", "soft_neighbors", c.vocabulary.soft_neighbors);
    read(t, "vocabulary", "seed", c.vocabulary.seed);
  }
  if (j.contains("noise")) {
    const json& t = j["noise"];
    reject_unknown(t, "noise", {"position_sigma", "yaw_sigma", "dropout"});
    read(t, "noise", "position_sigma", c.noise.position_sigma);
    read(t, "noise", "yaw_sigma", c.noise.yaw_sigma);
    read(t, "noise", "dropout", c.noise.dropout);
  }
  c.validate();
  return c;
}

std::map<std::string, std::string> distill_environment() {
  std::map<std::string, std::string> out;
  const std::string prefix = kEnvPrefix;
  for (char** e = environ; e != nullptr && *e != nullptr; ++e) {
    const std::string entry = *e;
    if (entry.rfind(prefix, 0) != 0) continue;
    const auto eq = entry.find('=');
    if (eq == std::string::npos) continue;
    out[entry.substr(0, eq)] = entry.substr(eq + 1);
  }
  return out;
}

json apply_environment_overrides(json base, const std::map<std::string, std::string>& env) {
  const std::string prefix = kEnvPrefix;
  for (const auto& [name, raw] : env) {
    if (name.rfind(prefix, 0) != 0) continue;
    std::string path = name.substr(prefix.size());
    std::transform(path.begin(), path.end(), path.begin(), [](unsigned char ch) { return std::tolower(ch); });
    std::vector<std::string> keys;
    for (std::size_t pos = 0;;) {
      const auto next = path.find("__", pos);
      keys.push_back(path.substr(pos, next == std::string::npos ? std::string::npos : next - pos));
      if (next == std::string::npos) break;
      pos = next + 2;
    }
    if (keys.size() != 2) throw ConfigError(name, "override must name <section>__<key>");
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::exception&) {
      value = raw;
    }
    base[keys[0]][keys[1]] = value;
  }
  return base;
}

TrainingConfig load_config(const std::filesystem::path& path) {
  json j = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("--config", "cannot open " + path.string());
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError("--config", std::string("malformed JSON: ") + e.what());
    }
  }
  return config_from_json(apply_environment_overrides(std::move(j), distill_environment()));
}

void save_config(const TrainingConfig& config, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << to_json(config).dump(2) << '\n';
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string config_digest(const TrainingConfig& config) { return fnv1a_hex(to_json(config).dump()); }

}  // namespace distill
