#include "distill/imitation_head.hpp"

#include "distill/error.hpp"

#include <cmath>

namespace distill {

ImitationHead::ImitationHead(nn::ParameterStore& store, const std::string& name, const ModelConfig& config,
                             nn::Rng& rng)
    : traj_(store, name + ".traj", config.dim, config.dim, kTrajCols, rng),
      score_(store, name + ".score", config.dim, config.dim, 1, rng),
      status_(store, name + ".status", config.dim, config.dim, kStatusDim, rng) {}

PlanOutput ImitationHead::predict(Tape& tape, Var decoded_ego) const {
  PlanOutput out;
  out.trajs = traj_(tape, decoded_ego);
  out.scores = score_(tape, decoded_ego);
  out.status = status_(tape, decoded_ego);
  return out;
}

Mat displacement_row(const Trajectory& positions) {
  Mat row(1, 2 * static_cast<Eigen::Index>(positions.size()));
  Vec2 prev = Vec2::Zero();
  for (std::size_t t = 0; t < positions.size(); ++t) {
    const Vec2 d = positions[t] - prev;
    row(0, 2 * t) = d.x();
    row(0, 2 * t + 1) = d.y();
    prev = positions[t];
  }
  return row;
}

Mat status_rows(std::span<const EgoStatus> status) {
  Mat out(static_cast<Eigen::Index>(status.size()), kStatusDim);
  for (std::size_t t = 0; t < status.size(); ++t)
    for (int c = 0; c < kStatusDim; ++c) out(t, c) = status[t][c];
  return out;
}

Var loss_reg(Var traj_selected, const Mat& expert_displacements) {
  Tape& tape = *traj_selected.tape();
  return ad::sum(ad::abs(traj_selected - tape.constant(expert_displacements)));
}

Var loss_status(Var status_selected, const Mat& expert_status) {
  Tape& tape = *status_selected.tape();
  Var pred = status_selected;
  if (pred.rows() == 1 && expert_status.rows() > 1) pred = ad::broadcast_rows(pred, expert_status.rows());
  if (pred.rows() != expert_status.rows()) throw InputError("status rows do not match expert rows");
  return ad::scale(ad::sum(ad::abs(pred - tape.constant(expert_status))), 1.0 / static_cast<double>(pred.rows()));
}

Var loss_cls(Var scores, std::span<const double> soft_label) {
  Tape& tape = *scores.tape();
  const Eigen::Index n = scores.rows() * scores.cols();
  if (static_cast<Eigen::Index>(soft_label.size()) != n) throw InputError("soft label size does not match scores");
  Mat p(1, n);
  double entropy_term = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    p(0, i) = soft_label[static_cast<std::size_t>(i)];
    if (p(0, i) > 0.0) entropy_term += p(0, i) * std::log(p(0, i));
  }
  const Var log_q = ad::log_softmax_rows(ad::reshape(scores, 1, n));
  // sum p log p - sum p log q
  return ad::add_scalar(ad::scale(ad::sum(ad::cmul(tape.constant(std::move(p)), log_q)), -1.0), entropy_term);
}

Var loss_il(Var reg, Var status, Var cls) {
  return ad::scale(reg, kRegWeight) + ad::scale(status, kStatusWeight) + ad::scale(cls, kClsWeight);
}

double loss_il(const ILLossReport& r) { return kRegWeight * r.l_reg + kStatusWeight * r.l_status + kClsWeight * r.l_cls; }

int select_mode(const Mat& scores) {
  int best = 0;
  for (Eigen::Index i = 1; i < scores.size(); ++i)
    if (scores.data()[i] > scores.data()[best]) best = static_cast<int>(i);
  return best;
}

Trajectory positions_from_row(const Mat& trajs, Eigen::Index row) {
  Trajectory out;
  Vec2 acc = Vec2::Zero();
  for (Eigen::Index t = 0; t < trajs.cols() / 2; ++t) {
    acc += Vec2(trajs(row, 2 * t), trajs(row, 2 * t + 1));
    out.push_back(acc);
  }
  return out;
}

Trajectory select_plan(const Mat& trajs, const Mat& scores) {
  if (trajs.rows() == 0 || trajs.rows() != scores.size()) throw InputError("plan output has no modes");
  return positions_from_row(trajs, select_mode(scores));
}

}  // namespace distill
