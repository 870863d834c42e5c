#pragma once

#include "distill/scene.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace distill {

using Trajectory = std::vector<Vec2>;

// Clustered multi-mode hypotheses. endpoints[i] == modes[i].back().
struct PlanningVocabulary {
  std::vector<Trajectory> modes;
  std::vector<Vec2> endpoints;

  int size() const { return static_cast<int>(modes.size()); }
  bool operator==(const PlanningVocabulary&) const = default;
};

struct KMeansTrace {
  std::vector<double> objective;  // within-cluster SSE after each iteration
  int iterations = 0;
};

inline constexpr int kDefaultSoftNeighbors = 4;
inline constexpr double kSoftLabelTop = 0.8;

// k-means over [per-step displacements, endpoint] features (k-means++ seeding,
// at most 50 Lloyd iterations).
PlanningVocabulary cluster_vocabulary(const std::vector<Trajectory>& trajs, int mode_count,
                                      std::uint64_t seed, KMeansTrace* trace = nullptr);

// Mean per-point Euclidean distance.
double mean_point_distance(const Trajectory& a, const Trajectory& b);

// argmin of mean_point_distance; ties go to the lower index.
int nearest_mode(const Trajectory& expert, const PlanningVocabulary& vocab);

// 0.8 on the nearest mode, 0.2 shared by the next `neighbors` modes. With no
// neighbors the nearest mode takes all mass.
std::vector<double> soft_labels(const Trajectory& expert, const PlanningVocabulary& vocab,
                                int neighbors = kDefaultSoftNeighbors);

Trajectory displacements(const Trajectory& traj);  // first step measured from the origin
Trajectory positions_from_displacements(const Trajectory& disp);

void write_vocabulary(const PlanningVocabulary& vocab, const std::filesystem::path& path);
PlanningVocabulary read_vocabulary(const std::filesystem::path& path);

}  // namespace distill
