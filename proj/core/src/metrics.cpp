#include "distill/metrics.hpp"

#include "distill/error.hpp"
#include "distill/parallel.hpp"
#include "distill/record_io.hpp"

#include <map>

namespace distill {

std::array<double, 3> open_loop_l2(const Trajectory& pred, const Trajectory& expert) {
  if (pred.size() < kFutureSteps || expert.size() < kFutureSteps)
    throw InputError("open-loop L2 needs " + std::to_string(kFutureSteps) + "-step trajectories");
  std::array<double, 3> out{};
  for (int h = 0; h < 3; ++h) out[h] = (pred[kHorizonSteps[h] - 1] - expert[kHorizonSteps[h] - 1]).norm();
  return out;
}

std::array<bool, 3> collision_flags(const Trajectory& pred, const Scene& scene, const Vec2& ego_dims) {
  const auto hits = check_collision(pred, ego_dims, trajectory_yaws(pred), scene.agent_futures);
  std::array<bool, 3> out{};
  bool any = false;
  int h = 0;
  for (int step = 0; step < kFutureSteps && h < 3; ++step) {
    any = any || hits[static_cast<std::size_t>(step)];
    if (step + 1 == kHorizonSteps[h]) out[h++] = any;
  }
  return out;
}

std::array<double, 3> collision_rate(const std::vector<Trajectory>& preds, const std::vector<Scene>& scenes,
                                     const Vec2& ego_dims) {
  if (preds.size() != scenes.size()) throw InputError("prediction count does not match scene count");
  std::array<double, 3> out{};
  if (scenes.empty()) return out;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto f = collision_flags(preds[i], scenes[i], ego_dims);
    for (int h = 0; h < 3; ++h) out[h] += f[h] ? 1.0 : 0.0;
  }
  for (double& v : out) v = 100.0 * v / static_cast<double>(scenes.size());
  return out;
}

OpenLoopReport summarize(const std::vector<Trajectory>& preds, const std::vector<Scene>& scenes,
                         const Vec2& ego_dims) {
  if (preds.size() != scenes.size()) throw InputError("prediction count does not match scene count");
  OpenLoopReport r;
  r.scenes = static_cast<int>(scenes.size());
  if (scenes.empty()) return r;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const auto l2 = open_loop_l2(preds[i], scenes[i].expert.future_traj);
    for (int h = 0; h < 3; ++h) r.l2[h] += l2[h];
  }
  for (double& v : r.l2) v /= static_cast<double>(scenes.size());
  r.collision = collision_rate(preds, scenes, ego_dims);
  r.l2_avg = (r.l2[0] + r.l2[1] + r.l2[2]) / 3.0;
  r.collision_avg = (r.collision[0] + r.collision[1] + r.collision[2]) / 3.0;
  return r;
}

namespace {

ForwardResult eval_forward(Tape& tape, const Planner& model, const Scene& scene, const TrainingConfig& c,
                           std::uint64_t eval_seed) {
  const std::uint64_t s = derive_seed(eval_seed, static_cast<std::uint64_t>(scene.scene_id), 0xe7a1);
  const SceneInputs in = prepare_inputs(model_view(scene, model.phase(), c.noise, s));
  BridgeContext bridge;
  bridge.train = false;
  bridge.zeta = c.zeta;
  bridge.noise_seed = derive_seed(s, 0xb41d9e);
  const bool use_bridge = model.phase() == Phase::Student && c.toggles.generative;
  return model.forward(tape, in, use_bridge ? &bridge : nullptr);
}

}  // namespace

std::vector<Trajectory> predict_scenes(const Planner& model, const std::vector<Scene>& scenes,
                                       const TrainingConfig& c, std::uint64_t eval_seed) {
  std::vector<Trajectory> out(scenes.size());
  parallel_for(scenes.size(), c.threads, [&](std::size_t i) {
    Tape tape;
    const ForwardResult f = eval_forward(tape, model, scenes[i], c, eval_seed);
    out[i] = select_plan(f.plan.trajs.value(), f.plan.scores.value());
  });
  return out;
}

OpenLoopReport evaluate(const Planner& model, const std::vector<Scene>& scenes, const TrainingConfig& c,
                        std::uint64_t eval_seed) {
  return summarize(predict_scenes(model, scenes, c, eval_seed), scenes,
                   Vec2(c.generator.ego_length, c.generator.ego_width));
}

void export_mode_features(const Planner& model, const std::vector<Scene>& scenes, const TrainingConfig& c,
                          std::uint64_t eval_seed, const std::filesystem::path& path) {
  io::RecordWriter w(path, "distill-features", 1);
  for (const Scene& scene : scenes) {
    Tape tape;
    const ForwardResult f = eval_forward(tape, model, scene, c, eval_seed);
    const Mat& feats = f.ego_decoded.value();
    for (Eigen::Index m = 0; m < feats.rows(); ++m) {
      std::vector<double> row(feats.row(m).data(), feats.row(m).data() + feats.cols());
      w.write({{"scene_id", scene.scene_id}, {"mode", m}, {"feature", row}});
    }
  }
}

std::vector<ModeFeatures> read_mode_features(const std::filesystem::path& path) {
  std::vector<ModeFeatures> out;
  std::map<std::int64_t, std::size_t> index;
  std::vector<std::vector<std::vector<double>>> rows;
  io::read_records(path, "distill-features", 1, [&](const io::json& rec, std::size_t) {
    const auto id = rec.at("scene_id").get<std::int64_t>();
    auto [it, inserted] = index.try_emplace(id, out.size());
    if (inserted) {
      out.push_back({id, Mat()});
      rows.emplace_back();
    }
    rows[it->second].push_back(rec.at("feature").get<std::vector<double>>());
  });
  for (std::size_t s = 0; s < out.size(); ++s) {
    const auto& r = rows[s];
    out[s].features.resize(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.front().size()));
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (r[i].size() != r.front().size()) throw InputError("feature rows differ in width");
      for (std::size_t j = 0; j < r[i].size(); ++j) out[s].features(i, j) = r[i][j];
    }
  }
  return out;
}

}  // namespace distill
