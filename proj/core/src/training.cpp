#include "distill/training.hpp"

#include "distill/error.hpp"
#include "distill/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace distill {

using nlohmann::json;

namespace {

constexpr double kBeta1 = 0.9;
constexpr double kBeta2 = 0.999;
constexpr double kEpsilon = 1e-8;

#define DISTILL_LOSS_FIELDS(X) \
  X(l_reg)                     \
  X(l_status)                  \
  X(l_cls)                     \
  X(l_il)                      \
  X(l_rl)                      \
  X(l_ds)                      \
  X(l_en)                      \
  X(l_de)                      \
  X(l_cls_kd)                  \
  X(l_reg_kd)                  \
  X(l_kd)                      \
  X(l_t)

void check_finite(const LossReport& r, int epoch, std::size_t scene) {
#define DISTILL_CHECK(f)                                                                               \
  if (!std::isfinite(r.f))                                                                             \
    throw NumericError(std::string(#f) + " is " + std::to_string(r.f) + " at epoch " + std::to_string(epoch) + \
                       ", scene index " + std::to_string(scene));
  DISTILL_LOSS_FIELDS(DISTILL_CHECK)
#undef DISTILL_CHECK
}

void accumulate(LossReport& acc, const LossReport& r) {
#define DISTILL_ADD(f) acc.f += r.f;
  DISTILL_LOSS_FIELDS(DISTILL_ADD)
#undef DISTILL_ADD
}

void divide(LossReport& acc, double n) {
#define DISTILL_DIV(f) acc.f /= n;
  DISTILL_LOSS_FIELDS(DISTILL_DIV)
#undef DISTILL_DIV
}

Var zero(Tape& tape) { return tape.constant(Mat::Zero(1, 1)); }

}  // namespace

json to_json(const LossReport& r) {
  json j;
#define DISTILL_TO(f) j[#f] = r.f;
  DISTILL_LOSS_FIELDS(DISTILL_TO)
#undef DISTILL_TO
  return j;
}

LossReport loss_report_from_json(const json& j) {
  LossReport r;
#define DISTILL_FROM(f) r.f = j.at(#f).get<double>();
  DISTILL_LOSS_FIELDS(DISTILL_FROM)
#undef DISTILL_FROM
  return r;
}

double assemble_total_loss(const LossReport& p, const TrainingConfig& c, Phase phase) {
  if (phase == Phase::Teacher) return p.l_il + c.rl_weight * p.l_rl;
  return c.kd_weight * p.l_kd + c.ds_weight * p.l_ds + c.rl_weight * p.l_rl + p.l_il;
}

std::uint64_t derive_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  auto mix = [](std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  };
  return mix(mix(mix(a) ^ b) ^ c);
}

Scene model_view(const Scene& scene, Phase phase, const NoiseSpec& noise, std::uint64_t seed) {
  return phase == Phase::Teacher ? scene : perturb_instances(scene, noise, seed);
}

AdamW::AdamW(nn::ParameterStore& store, const TrainingConfig& c, long total_steps)
    : store_(&store),
      lr_(c.learning_rate),
      min_lr_(c.learning_rate * c.min_learning_rate_ratio),
      wd_(c.weight_decay),
      clip_(c.grad_clip),
      total_(std::max(1L, total_steps)),
      warmup_(static_cast<long>(c.warmup_fraction * static_cast<double>(total_))) {
  for (std::size_t i = 0; i < store.size(); ++i) {
    m_.push_back(Mat::Zero(store[i].value.rows(), store[i].value.cols()));
    v_.push_back(Mat::Zero(store[i].value.rows(), store[i].value.cols()));
  }
}

double AdamW::learning_rate() const {
  if (t_ < warmup_) return lr_ * static_cast<double>(t_ + 1) / static_cast<double>(warmup_);
  const double progress =
      std::min(1.0, static_cast<double>(t_ - warmup_) / static_cast<double>(std::max(1L, total_ - warmup_)));
  return min_lr_ + 0.5 * (lr_ - min_lr_) * (1.0 + std::cos(M_PI * progress));
}

void AdamW::step(const ad::GradientMap& grads) {
  double norm2 = 0.0;
  for (std::size_t i = 0; i < store_->size(); ++i) {
    const auto it = grads.find(&(*store_)[i]);
    if (it != grads.end()) norm2 += it->second.squaredNorm();
  }
  const double norm = std::sqrt(norm2);
  const double factor = (clip_ > 0.0 && norm > clip_) ? clip_ / norm : 1.0;
  const double lr = learning_rate();
  ++t_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < store_->size(); ++i) {
    ad::Parameter& p = (*store_)[i];
    if (p.frozen) continue;
    const auto it = grads.find(&p);
    if (it != grads.end()) {
      const Mat g = it->second * factor;
      m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * g;
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * g.cwiseProduct(g);
    } else {
      m_[i] *= kBeta1;
      v_[i] *= kBeta2;
    }
    const Mat update = ((m_[i] / c1).array() / ((v_[i] / c2).array().sqrt() + kEpsilon)).matrix();
    p.value -= lr * (update + wd_ * p.value);
  }
}

SceneTargets make_targets(const Scene& scene, const PlanningVocabulary& vocab, int soft_neighbors) {
  SceneTargets t;
  t.expert_displacements = displacement_row(scene.expert.future_traj);
  if (scene.expert.future_status.empty()) throw InputError("scene " + std::to_string(scene.scene_id) + " has no status");
  t.expert_status = status_rows(std::span<const EgoStatus>(scene.expert.future_status.data(), 1));
  t.soft_label = soft_labels(scene.expert.future_traj, vocab, soft_neighbors);
  t.winner = nearest_mode(scene.expert.future_traj, vocab);
  t.command = scene.expert.command;
  return t;
}

TeacherOutputs run_teacher(const Planner& teacher, const Scene& scene) {
  Tape tape;
  const SceneInputs in = prepare_inputs(scene);
  const ForwardResult f = teacher.forward(tape, in);
  TeacherOutputs out;
  out.ego_encoded = f.ego_encoded.value();
  out.agents_encoded = f.agents_encoded.value();
  out.agent_index = in.agent_index;
  out.map_encoded = f.map_encoded.value();
  out.ego_decoded = f.ego_decoded.value();
  out.scores = f.plan.scores.value();
  out.trajs = f.plan.trajs.value();
  return out;
}

SceneLoss scene_loss(Tape& tape, const Planner& model, const SceneInputs& in, const Scene& clean,
                     const SceneTargets& targets, const TrainingConfig& c, const TeacherOutputs* teacher,
                     std::uint64_t noise_seed) {
  const bool student = model.phase() == Phase::Student;
  BridgeContext bridge;
  bridge.train = true;
  bridge.zeta = c.zeta;
  bridge.noise_seed = noise_seed;
  bridge.clean = &clean;
  bridge.winner = targets.winner;
  const bool use_bridge = student && c.toggles.generative;
  const ForwardResult f = model.forward(tape, in, use_bridge ? &bridge : nullptr);

  SceneLoss out;
  LossReport& r = out.parts;
  const Var traj_w = ad::slice_rows(f.plan.trajs, targets.winner, 1);
  const Var status_w = ad::slice_rows(f.plan.status, targets.winner, 1);
  const Var reg = loss_reg(traj_w, targets.expert_displacements);
  const Var status = loss_status(status_w, targets.expert_status);
  const Var cls = loss_cls(f.plan.scores, targets.soft_label);
  const Var il = loss_il(reg, status, cls);
  r.l_reg = reg.scalar();
  r.l_status = status.scalar();
  r.l_cls = cls.scalar();
  r.l_il = il.scalar();

  Var rl = zero(tape);
  if (c.toggles.rl) {
    const Trajectory positions = positions_from_row(f.plan.trajs.value(), targets.winner);
    EgoStatus pred_status{};
    for (int k = 0; k < kStatusDim; ++k) pred_status[k] = status_w.value()(0, k);
    const auto x = reward_components(positions, pred_status, clean.expert, clean,
                                     Vec2(c.generator.ego_length, c.generator.ego_width));
    Mat xm(1, kRewardCount);
    for (int k = 0; k < kRewardCount; ++k) xm(0, k) = x[k];
    const Var reward = aggregate_reward(tape.constant(std::move(xm)), model.reward_weights()(tape), c.rewards);
    rl = loss_rl(status_w, targets.expert_status, targets.command, model.q_networks(), reward).total;
  }
  r.l_rl = rl.scalar();

  if (!student) {
    out.total = il + ad::scale(rl, c.rl_weight);
    r.l_t = out.total.scalar();
    return out;
  }

  Var kd = zero(tape);
  if (c.toggles.kd) {
    if (teacher == nullptr) throw InputError("student distillation needs teacher outputs");
    const KdFlags& flags = c.kd;
    std::vector<Var> enc_terms;
    enc_terms.push_back(loss_encoder_kd(f.ego_encoded, teacher->ego_encoded));
    if (f.map_encoded.rows() > 0) enc_terms.push_back(loss_encoder_kd(f.map_encoded, teacher->map_encoded));
    std::vector<int> srows, trows;
    for (int k = 0; k < in.agent_count(); ++k) {
      const auto it = std::find(teacher->agent_index.begin(), teacher->agent_index.end(), in.agent_index[k]);
      if (it == teacher->agent_index.end()) continue;
      srows.push_back(k);
      trows.push_back(static_cast<int>(it - teacher->agent_index.begin()));
    }
    if (!srows.empty()) {
      Mat t(static_cast<Eigen::Index>(trows.size()), teacher->agents_encoded.cols());
      for (std::size_t i = 0; i < trows.size(); ++i) t.row(i) = teacher->agents_encoded.row(trows[i]);
      enc_terms.push_back(loss_encoder_kd(ad::gather_rows(f.agents_encoded, srows), t));
    }
    Var en = enc_terms.front();
    for (std::size_t i = 1; i < enc_terms.size(); ++i) en = en + enc_terms[i];
    en = ad::scale(en, 1.0 / static_cast<double>(enc_terms.size()));
    const Var de = loss_decoder_kd(f.ego_decoded, teacher->ego_decoded, model.adapter());
    const Var ckd = loss_cls_kd(f.plan.scores, teacher->scores);
    const Var rkd = loss_reg_kd(f.plan.trajs, teacher->trajs);
    r.l_en = en.scalar();
    r.l_de = de.scalar();
    r.l_cls_kd = ckd.scalar();
    r.l_reg_kd = rkd.scalar();
    if (flags.encoder) kd = kd + en;
    if (flags.decoder) kd = kd + de;
    if (flags.cls) kd = kd + ckd;
    if (flags.reg) kd = kd + rkd;
  }
  r.l_kd = kd.scalar();

  Var ds = zero(tape);
  if (use_bridge) ds = loss_distribution(f.bridge->instances, f.bridge->targets, f.bridge->pairs);
  r.l_ds = ds.scalar();

  out.total = ad::scale(kd, c.kd_weight) + ad::scale(ds, c.ds_weight) + ad::scale(rl, c.rl_weight) + il;
  r.l_t = out.total.scalar();
  return out;
}

namespace {

TrainResult train_impl(const std::vector<Scene>& scenes, std::unique_ptr<Planner> model, const Planner* teacher,
                       const TrainingConfig& c, int epochs, const EpochCallback& on_epoch) {
  if (scenes.empty()) throw InputError("training needs at least one scene");
  const Phase phase = model->phase();
  const std::size_t n = scenes.size();
  const int threads = resolve_threads(c.threads);

  std::vector<SceneTargets> targets(n);
  std::vector<SceneInputs> clean_inputs(phase == Phase::Teacher ? n : 0);
  std::vector<TeacherOutputs> teacher_out(teacher ? n : 0);
  parallel_for(n, threads, [&](std::size_t i) {
    targets[i] = make_targets(scenes[i], model->vocabulary(), c.vocabulary.soft_neighbors);
    if (phase == Phase::Teacher) clean_inputs[i] = prepare_inputs(scenes[i]);
    if (teacher) teacher_out[i] = run_teacher(*teacher, scenes[i]);
  });

  const std::size_t batch = static_cast<std::size_t>(c.batch_size);
  const long steps_per_epoch = static_cast<long>((n + batch - 1) / batch);
  AdamW opt(model->parameters(), c, steps_per_epoch * epochs);
  nn::ParameterStore& store = model->parameters();

  TrainResult result;
  for (int epoch = 0; epoch < epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 shuffle_rng(derive_seed(c.seed, static_cast<std::uint64_t>(epoch), 0x5eed));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    LossReport epoch_sum;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t count = std::min(batch, n - start);
      std::vector<ad::GradientMap> grads(count);
      std::vector<LossReport> reports(count);
      parallel_for(count, threads, [&](std::size_t b) {
        const std::size_t idx = order[start + b];
        const Scene& scene = scenes[idx];
        const std::uint64_t s = derive_seed(c.seed, static_cast<std::uint64_t>(epoch), idx);
        Tape tape;
        SceneInputs view_inputs;
        if (phase == Phase::Student) view_inputs = prepare_inputs(perturb_instances(scene, c.noise, s));
        const SceneInputs& in = phase == Phase::Teacher ? clean_inputs[idx] : view_inputs;
        const SceneLoss sl = scene_loss(tape, *model, in, scene, targets[idx], c,
                                        teacher ? &teacher_out[idx] : nullptr, derive_seed(s, 0xb41d9e));
        reports[b] = sl.parts;
        check_finite(sl.parts, epoch, idx);
        tape.backward(ad::scale(sl.total, 1.0 / static_cast<double>(count)));
        tape.collect_gradients(grads[b]);
      });
      ad::GradientMap total;
      for (std::size_t i = 0; i < store.size(); ++i) {
        const ad::Parameter* p = &store[i];
        for (std::size_t b = 0; b < count; ++b) {
          const auto it = grads[b].find(p);
          if (it == grads[b].end()) continue;
          auto [slot, inserted] = total.try_emplace(p, it->second);
          if (!inserted) slot->second += it->second;
        }
      }
      for (const LossReport& r : reports) accumulate(epoch_sum, r);
      opt.step(total);
      if (!store.all_finite())
        throw NumericError("parameters became non-finite at epoch " + std::to_string(epoch));
    }
    divide(epoch_sum, static_cast<double>(n));
    epoch_sum.l_il = loss_il(ILLossReport{epoch_sum.l_reg, epoch_sum.l_status, epoch_sum.l_cls, 0.0});
    KDLossReport kd{epoch_sum.l_en, epoch_sum.l_de, epoch_sum.l_cls_kd, epoch_sum.l_reg_kd, 0.0, c.kd};
    if (phase == Phase::Student) epoch_sum.l_kd = c.toggles.kd ? loss_kd_total(kd) : 0.0;
    epoch_sum.l_t = assemble_total_loss(epoch_sum, c, phase);
    result.history.push_back(epoch_sum);
    if (on_epoch) on_epoch(epoch, epoch_sum);
  }
  result.model = std::move(model);
  return result;
}

}  // namespace

TrainResult train_teacher(const std::vector<Scene>& scenes, const PlanningVocabulary& vocab,
                          const TrainingConfig& c, const EpochCallback& on_epoch) {
  c.validate();
  auto model = std::make_unique<Planner>(c.model, vocab, Phase::Teacher, c.gamma, c.seed);
  return train_impl(scenes, std::move(model), nullptr, c, c.teacher_epochs, on_epoch);
}

TrainResult train_student(const std::vector<Scene>& scenes, const Planner& teacher, const TrainingConfig& c,
                          const EpochCallback& on_epoch) {
  c.validate();
  if (teacher.phase() != Phase::Teacher) throw InputError("train_student needs a teacher checkpoint");
  auto model = std::make_unique<Planner>(c.model, teacher.vocabulary(), Phase::Student, c.gamma, c.seed);
  return train_impl(scenes, std::move(model), c.toggles.kd ? &teacher : nullptr, c, c.student_epochs, on_epoch);
}

}  // namespace distill
