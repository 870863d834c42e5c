#pragma once

#include "distill/training.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace distill {

inline constexpr const char* kCheckpointFormat = "distill-checkpoint";
inline constexpr int kCheckpointVersion = 1;

struct CheckpointManifest {
  int version = kCheckpointVersion;
  Phase phase = Phase::Teacher;
  int epoch = 0;
  std::string config_digest;
  TrainingConfig config;
  std::vector<LossReport> history;
  std::string weights_checksum;
};

struct LoadedCheckpoint {
  CheckpointManifest manifest;
  std::unique_ptr<Planner> model;
  std::vector<std::string> warnings;  // e.g. config digest mismatch
};

// Writes manifest.json, weights.bin and vocab.jsonl into `dir`.
void save_checkpoint(const Planner& model, const TrainingConfig& config, const std::vector<LossReport>& history,
                     const std::filesystem::path& dir);

// Verifies header, checksum and parameter layout. When `expected` is given, a
// config digest mismatch is reported through `warnings`.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir, const TrainingConfig* expected = nullptr);

}  // namespace distill
