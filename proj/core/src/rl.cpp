#include "distill/rl.hpp"

#include "distill/error.hpp"

#include <cmath>

namespace distill {

namespace {

int idx(RewardTerm t) { return static_cast<int>(t); }

}  // namespace

std::array<double, kRewardCount> reward_components(const Trajectory& pred, const EgoStatus& pred_status,
                                                   const ExpertPlan& expert, const Scene& scene,
                                                   const Vec2& ego_dims) {
  if (pred.size() != expert.future_traj.size() || pred.empty())
    throw InputError("predicted and expert trajectories differ in length");
  if (expert.future_status.empty()) throw InputError("expert plan has no status");
  std::array<double, kRewardCount> x{};

  const EgoStatus& s = expert.future_status.front();
  double status_err = 0.0;
  for (int c = 0; c < kStatusDim; ++c) status_err += std::abs(pred_status[c] - s[c]);
  x[idx(RewardTerm::State)] = status_err / kStatusDim;

  double mean = 0.0;
  for (std::size_t t = 0; t < pred.size(); ++t) mean += (pred[t] - expert.future_traj[t]).norm();
  x[idx(RewardTerm::TrajMean)] = mean / static_cast<double>(pred.size());
  x[idx(RewardTerm::TrajStart)] = (pred.front() - expert.future_traj.front()).norm();
  x[idx(RewardTerm::TrajEnd)] = (pred.back() - expert.future_traj.back()).norm();

  const double vx = pred_status[status::kVx];
  x[idx(RewardTerm::SpeedGate)] = (vx > 0.0 && vx < kSpeedLimit) ? 0.0 : 1.0;
  x[idx(RewardTerm::Consistency)] = std::abs(vx * kFramePeriod - pred.front().x());

  const auto hits = check_collision(pred, ego_dims, trajectory_yaws(pred), scene.agent_futures);
  bool any = false;
  for (bool h : hits) any = any || h;
  x[idx(RewardTerm::Collision)] = any ? 1.0 : 0.0;
  return x;
}

Var aggregate_reward(Var x, Var omega, const RewardMask& enabled) {
  Tape& tape = *x.tape();
  Mat m(1, kRewardCount);
  for (int i = 0; i < kRewardCount; ++i) m(0, i) = enabled[i] ? 1.0 : 0.0;
  return ad::sum(ad::cmul(ad::cmul(omega, ad::exp(ad::scale(x, -1.0))), tape.constant(std::move(m))));
}

double aggregate_reward(const std::array<double, kRewardCount>& x, const std::array<double, kRewardCount>& omega,
                        const RewardMask& enabled) {
  double r = 0.0;
  for (int i = 0; i < kRewardCount; ++i)
    if (enabled[i]) r += omega[i] * std::exp(-x[i]);
  return r;
}

RewardWeights::RewardWeights(nn::ParameterStore& store, const std::string& name) {
  // softplus(log(e - 1)) = 1
  raw_ = &store.create(name, Mat::Constant(1, kRewardCount, std::log(std::exp(1.0) - 1.0)));
}

Var RewardWeights::operator()(Tape& tape) const { return ad::softplus(tape.param(*raw_)); }

std::array<double, kRewardCount> RewardWeights::values() const {
  std::array<double, kRewardCount> out{};
  for (int i = 0; i < kRewardCount; ++i) out[i] = std::log1p(std::exp(raw_->value(0, i)));
  return out;
}

QNetworks::QNetworks(nn::ParameterStore& store, const std::string& name, const ModelConfig& config, double gamma,
                     nn::Rng& rng)
    : main_(store, name + ".main", kStatusDim, config.q_hidden, kCommandCount, rng),
      target_(store, name + ".target", kStatusDim, config.q_hidden, kCommandCount, rng),
      gamma_(gamma) {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("training.gamma", "must lie in [0, 1)");
}

double q_target_value(double reward, double max_q, double gamma) { return reward + gamma * max_q; }

Var q_target_value(Var reward, const Mat& expert_status, const QNetworks& nets) {
  Tape& tape = *reward.tape();
  const Var q = nets.target(tape, tape.constant(expert_status));
  return ad::add_scalar(reward, nets.gamma() * q.value().maxCoeff());
}

Mat action_one_hot(Command c) {
  Mat a = Mat::Zero(1, kCommandCount);
  a(0, static_cast<int>(c)) = 1.0;
  return a;
}

RLLoss loss_rl(Var pred_status, const Mat& expert_status, Command action_label, const QNetworks& nets, Var reward) {
  Tape& tape = *pred_status.tape();
  if (expert_status.rows() != 1 || expert_status.cols() != kStatusDim)
    throw InputError("RL loss expects a single expert status row");
  RLLoss out;
  const Var q_target = nets.target(tape, tape.constant(expert_status));
  out.term_target = ad::sum(ad::abs(q_target - tape.constant(action_one_hot(action_label))));

  const Mat& qv = q_target.value();
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < qv.cols(); ++i)
    if (qv(0, i) > qv(0, best)) best = i;
  out.action = static_cast<int>(best);
  const Var y = ad::add_scalar(reward, nets.gamma() * qv(0, best));
  const Var q_main = ad::element(nets.main(tape, pred_status), 0, best);
  out.term_main = ad::abs(q_main - y);
  out.total = out.term_target + out.term_main;
  return out;
}

}  // namespace distill
