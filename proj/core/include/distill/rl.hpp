#pragma once

#include "distill/config.hpp"
#include "distill/imitation_head.hpp"

#include <array>

namespace distill {

inline constexpr double kSpeedLimit = 20.0;  // m/s, legal range (0, 20)

// Error components x_i (0 = compliant) in RewardTerm order.
struct RewardBreakdown {
  std::array<double, kRewardCount> x{};
  std::array<double, kRewardCount> omega{};
  double reward = 0.0;
};

using RewardMask = std::array<bool, kRewardCount>;

// Errors of a selected plan against the expert. `pred_positions` are ego-frame
// positions, `pred_status` the mode's status prediction.
std::array<double, kRewardCount> reward_components(const Trajectory& pred_positions, const EgoStatus& pred_status,
                                                   const ExpertPlan& expert, const Scene& scene,
                                                   const Vec2& ego_dims);

// r = sum_i omega_i exp(-x_i) over enabled terms. x and omega are 1 x kRewardCount.
Var aggregate_reward(Var x, Var omega, const RewardMask& enabled = {true, true, true, true, true, true, true});
double aggregate_reward(const std::array<double, kRewardCount>& x, const std::array<double, kRewardCount>& omega,
                        const RewardMask& enabled = {true, true, true, true, true, true, true});

// Learnable non-negative reward weights omega = softplus(raw), starting at 1.
class RewardWeights {
 public:
  RewardWeights() = default;
  RewardWeights(nn::ParameterStore& store, const std::string& name);
  Var operator()(Tape& tape) const;
  std::array<double, kRewardCount> values() const;
  ad::Parameter& raw() const { return *raw_; }

 private:
  ad::Parameter* raw_ = nullptr;
};

// Main and target value networks over ego status, 3 command values each.
class QNetworks {
 public:
  QNetworks() = default;
  QNetworks(nn::ParameterStore& store, const std::string& name, const ModelConfig& config, double gamma, nn::Rng& rng);

  Var main(Tape& tape, Var status) const { return main_(tape, status); }
  Var target(Tape& tape, Var status) const { return target_(tape, status); }
  double gamma() const { return gamma_; }
  void set_gamma(double g) { gamma_ = g; }

  const nn::Mlp& main_net() const { return main_; }
  const nn::Mlp& target_net() const { return target_; }

 private:
  nn::Mlp main_;
  nn::Mlp target_;
  double gamma_ = 0.95;
};

// y = r + gamma * max_a Q_T(s_expert, a), with Q_T held constant.
Var q_target_value(Var reward, const Mat& expert_status, const QNetworks& nets);
double q_target_value(double reward, double max_q, double gamma);

struct RLLoss {
  Var total;
  Var term_target;  // sum_i |Q_T(s_expert)_i - a_i|
  Var term_main;    // |Q_M(s_pred)_{a*} - y|
  int action = 0;   // argmax of Q_T(s_expert)
};

RLLoss loss_rl(Var pred_status, const Mat& expert_status, Command action_label, const QNetworks& nets, Var reward);

Mat action_one_hot(Command c);

}  // namespace distill
