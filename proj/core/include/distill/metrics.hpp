#pragma once

#include "distill/planner.hpp"
#include "distill/training.hpp"

#include <array>
#include <filesystem>
#include <vector>

namespace distill {

inline constexpr std::array<int, 3> kHorizonSteps{2, 4, 6};  // 1 s, 2 s, 3 s at 2 Hz

struct OpenLoopReport {
  std::array<double, 3> l2{};         // meters
  double l2_avg = 0.0;
  std::array<double, 3> collision{};  // percent of scenes
  double collision_avg = 0.0;
  int scenes = 0;

  bool operator==(const OpenLoopReport&) const = default;
};

// L2 at steps 2, 4 and 6.
std::array<double, 3> open_loop_l2(const Trajectory& pred, const Trajectory& expert);

// Per horizon: whether the ego box collides at any step up to it.
std::array<bool, 3> collision_flags(const Trajectory& pred, const Scene& scene, const Vec2& ego_dims);

// Percentages over scenes, from predicted trajectories aligned with `scenes`.
std::array<double, 3> collision_rate(const std::vector<Trajectory>& preds, const std::vector<Scene>& scenes,
                                     const Vec2& ego_dims);

OpenLoopReport summarize(const std::vector<Trajectory>& preds, const std::vector<Scene>& scenes,
                         const Vec2& ego_dims);

// Student models see perturbed inputs (seeded per scene from `eval_seed`) and
// run the bridge in inference mode.
std::vector<Trajectory> predict_scenes(const Planner& model, const std::vector<Scene>& scenes,
                                       const TrainingConfig& config, std::uint64_t eval_seed);

OpenLoopReport evaluate(const Planner& model, const std::vector<Scene>& scenes, const TrainingConfig& config,
                        std::uint64_t eval_seed);

// "distill-features" v1: one record per mode {"scene_id", "mode", "feature": [...]}.
void export_mode_features(const Planner& model, const std::vector<Scene>& scenes, const TrainingConfig& config,
                          std::uint64_t eval_seed, const std::filesystem::path& path);

struct ModeFeatures {
  std::int64_t scene_id = 0;
  Mat features;  // modes x D
};
std::vector<ModeFeatures> read_mode_features(const std::filesystem::path& path);

}  // namespace distill
