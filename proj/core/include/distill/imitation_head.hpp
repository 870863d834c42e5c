#pragma once

#include "distill/encoders.hpp"

#include <span>
#include <vector>

namespace distill {

inline constexpr int kTrajCols = 2 * kFutureSteps;  // per-step displacements, flattened x0 y0 x1 y1 ...

struct PlanOutput {
  Var trajs;   // N_E x kTrajCols displacements
  Var scores;  // N_E x 1 logits
  Var status;  // N_E x kStatusDim
};

struct ILLossReport {
  double l_reg = 0.0;
  double l_status = 0.0;
  double l_cls = 0.0;
  double l_il = 0.0;
};

inline constexpr double kRegWeight = 2.0;
inline constexpr double kStatusWeight = 3.0;
inline constexpr double kClsWeight = 0.5;

class ImitationHead {
 public:
  ImitationHead() = default;
  ImitationHead(nn::ParameterStore& store, const std::string& name, const ModelConfig& config, nn::Rng& rng);

  PlanOutput predict(Tape& tape, Var decoded_ego) const;

  const nn::Mlp& traj_head() const { return traj_; }
  const nn::Mlp& score_head() const { return score_; }
  const nn::Mlp& status_head() const { return status_; }

 private:
  nn::Mlp traj_;
  nn::Mlp score_;
  nn::Mlp status_;
};

// Row of per-step displacements for a position trajectory.
Mat displacement_row(const Trajectory& positions);
Mat status_rows(std::span<const EgoStatus> status);

// Sum over steps of the L1 distance between predicted and expert displacements.
Var loss_reg(Var traj_selected, const Mat& expert_displacements);
// L1 over the status components, averaged over rows. A single predicted row is
// compared against every expert row.
Var loss_status(Var status_selected, const Mat& expert_status);
// KL(soft_label || softmax(scores)) with 0 log 0 = 0.
Var loss_cls(Var scores, std::span<const double> soft_label);
Var loss_il(Var reg, Var status, Var cls);
double loss_il(const ILLossReport& report);

// Positions of the highest-scoring mode; ties go to the lower index.
Trajectory select_plan(const Mat& trajs, const Mat& scores);
int select_mode(const Mat& scores);
Trajectory positions_from_row(const Mat& trajs, Eigen::Index row);

}  // namespace distill
