#pragma once

// Global configuration: one hierarchical JSON file plus DISTILL_* environment
// overrides. Key paths are documented in README.md.

#include "distill/scene.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace distill {

struct ModelConfig {
  int dim = 128;
  int heads = 4;
  int ffn_hidden = 128;
  int memory_frames = 4;
  int latent_dim = 64;
  int levels = 4;
  int conv_channels = 16;
  int q_hidden = 64;

  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

struct VocabularyConfig {
  int mode_count = 32;
  int soft_neighbors = 4;
  std::uint64_t seed = 0;
  bool operator==(const VocabularyConfig&) const = default;
};

// Degradation applied to the student's agent inputs.
struct NoiseSpec {
  double position_sigma = 0.5;
  double yaw_sigma = 0.05;
  double dropout = 0.1;

  void validate() const;
  bool operator==(const NoiseSpec&) const = default;
};

inline constexpr int kRewardCount = 7;
enum class RewardTerm { State = 0, TrajMean, TrajStart, TrajEnd, SpeedGate, Consistency, Collision };

struct Toggles {
  bool rl = true;
  bool kd = true;
  bool generative = true;
  bool operator==(const Toggles&) const = default;
};

struct KdFlags {
  bool encoder = true;
  bool decoder = true;
  bool cls = true;
  bool reg = false;
  bool operator==(const KdFlags&) const = default;
};

struct TrainingConfig {
  // Loss weights: L_T = kd_weight * L_KD + ds_weight * L_DS + rl_weight * L_RL + L_IL.
  double kd_weight = 0.5;
  double ds_weight = 1.0;
  double rl_weight = 1.0;
  double gamma = 0.95;
  double zeta = 0.5;

  double learning_rate = 1e-4;
  double min_learning_rate_ratio = 0.01;
  double warmup_fraction = 0.05;  // share of all steps spent ramping up linearly
  double weight_decay = 1e-4;
  double grad_clip = 10.0;
  int teacher_epochs = 200;
  int student_epochs = 100;
  int batch_size = 4;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = hardware concurrency

  Toggles toggles;
  KdFlags kd;
  std::array<bool, kRewardCount> rewards{true, true, true, true, true, true, true};

  GeneratorSpec generator;
  ModelConfig model;
  VocabularyConfig vocabulary;
  NoiseSpec noise;

  void validate() const;
};

nlohmann::json to_json(const TrainingConfig& config);
TrainingConfig config_from_json(const nlohmann::json& j);

// Reads the file (if given) and applies environment overrides such as
// DISTILL_TRAINING__LEARNING_RATE=0.001 (double underscore = nesting).
// An empty path means defaults plus overrides.
TrainingConfig load_config(const std::filesystem::path& path);
nlohmann::json apply_environment_overrides(nlohmann::json base, const std::map<std::string, std::string>& env);
std::map<std::string, std::string> distill_environment();

void save_config(const TrainingConfig& config, const std::filesystem::path& path);

// Stable 64-bit digest of the canonical JSON form, as 16 hex digits.
std::string config_digest(const TrainingConfig& config);
std::string fnv1a_hex(const std::string& bytes);

inline constexpr const char* kEnvPrefix = "DISTILL_";

}  // namespace distill
