#pragma once

#include "distill/config.hpp"
#include "distill/planner.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

namespace distill {

struct LossReport {
  double l_reg = 0.0;
  double l_status = 0.0;
  double l_cls = 0.0;
  double l_il = 0.0;
  double l_rl = 0.0;
  double l_ds = 0.0;
  double l_en = 0.0;
  double l_de = 0.0;
  double l_cls_kd = 0.0;
  double l_reg_kd = 0.0;
  double l_kd = 0.0;
  double l_t = 0.0;

  bool operator==(const LossReport&) const = default;
};

nlohmann::json to_json(const LossReport& r);
LossReport loss_report_from_json(const nlohmann::json& j);

// Student: kd_weight*l_kd + ds_weight*l_ds + rl_weight*l_rl + l_il.
// Teacher: l_il + rl_weight*l_rl; l_kd and l_ds are ignored.
double assemble_total_loss(const LossReport& parts, const TrainingConfig& config, Phase phase);

// Decoupled weight decay Adam with a linear warmup and a cosine learning-rate schedule.
class AdamW {
 public:
  AdamW(nn::ParameterStore& store, const TrainingConfig& config, long total_steps);
  // Clips the global gradient norm, then updates every unfrozen parameter.
  void step(const ad::GradientMap& grads);
  double learning_rate() const;
  long steps() const { return t_; }

 private:
  nn::ParameterStore* store_;
  double lr_, min_lr_, wd_, clip_;
  long total_;
  long warmup_;
  long t_ = 0;
  std::vector<Mat> m_, v_;
};

// Supervision targets derived from the clean scene.
struct SceneTargets {
  Mat expert_displacements;  // 1 x kTrajCols
  Mat expert_status;         // 1 x kStatusDim, first future step
  std::vector<double> soft_label;
  int winner = 0;            // nearest vocabulary mode
  Command command = Command::Straight;
};
SceneTargets make_targets(const Scene& scene, const PlanningVocabulary& vocab, int soft_neighbors);

// Teacher features consumed by the distillation terms.
struct TeacherOutputs {
  Mat ego_encoded;
  Mat agents_encoded;
  std::vector<int> agent_index;
  Mat map_encoded;
  Mat ego_decoded;
  Mat scores;
  Mat trajs;
};
TeacherOutputs run_teacher(const Planner& teacher, const Scene& scene);

struct SceneLoss {
  Var total;
  LossReport parts;
};

// Loss of one scene. For the student, `teacher` supplies the distillation
// targets and `clean` is the unperturbed scene behind `inputs`.
SceneLoss scene_loss(Tape& tape, const Planner& model, const SceneInputs& inputs, const Scene& clean,
                     const SceneTargets& targets, const TrainingConfig& config, const TeacherOutputs* teacher,
                     std::uint64_t noise_seed);

struct TrainResult {
  std::unique_ptr<Planner> model;
  std::vector<LossReport> history;  // one averaged report per epoch
};

using EpochCallback = std::function<void(int epoch, const LossReport&)>;

TrainResult train_teacher(const std::vector<Scene>& scenes, const PlanningVocabulary& vocab,
                          const TrainingConfig& config, const EpochCallback& on_epoch = {});
TrainResult train_student(const std::vector<Scene>& scenes, const Planner& teacher, const TrainingConfig& config,
                          const EpochCallback& on_epoch = {});

// Deterministic seed derivation (splitmix64 over the inputs).
std::uint64_t derive_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0);

// Inputs the model sees for a scene: clean for the teacher, perturbed for the student.
Scene model_view(const Scene& scene, Phase phase, const NoiseSpec& noise, std::uint64_t seed);

}  // namespace distill
