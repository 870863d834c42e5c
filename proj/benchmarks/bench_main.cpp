#include "distill/hungarian.hpp"
#include "distill/training.hpp"
#include "distill/vocabulary.hpp"

#include <benchmark/benchmark.h>

#include <random>

namespace distill {
namespace {

std::vector<Scene> scenes_for(int count, int agents) {
  GeneratorSpec spec;
  spec.agent_count = agents;
  std::vector<Scene> out;
  for (int i = 0; i < count; ++i) out.push_back(generate_scene(static_cast<std::uint64_t>(i), spec));
  return out;
}

PlanningVocabulary vocab_for(const std::vector<Scene>& scenes, int modes) {
  std::vector<Trajectory> trajs;
  for (const Scene& s : scenes) trajs.push_back(s.expert.future_traj);
  return cluster_vocabulary(trajs, modes, 0);
}

// Forward and backward pass of one scene at the default model size.
void BM_SceneStep(benchmark::State& state) {
  const Phase phase = state.range(0) == 0 ? Phase::Teacher : Phase::Student;
  const auto scenes = scenes_for(40, static_cast<int>(state.range(1)));
  const TrainingConfig c;
  const PlanningVocabulary vocab = vocab_for(scenes, c.vocabulary.mode_count);
  const Planner teacher(c.model, vocab, Phase::Teacher, c.gamma, 1);
  const Planner model(c.model, vocab, phase, c.gamma, 2);
  const Scene& scene = scenes.front();
  const SceneTargets targets = make_targets(scene, vocab, c.vocabulary.soft_neighbors);
  const TeacherOutputs t_out = run_teacher(teacher, scene);
  const SceneInputs in = prepare_inputs(scene);
  for (auto _ : state) {
    Tape tape;
    const SceneLoss sl =
        scene_loss(tape, model, in, scene, targets, c, phase == Phase::Student ? &t_out : nullptr, 7);
    tape.backward(sl.total);
    benchmark::DoNotOptimize(sl.parts.l_t);
  }
  state.SetLabel(std::string(to_string(phase)));
}
BENCHMARK(BM_SceneStep)->Args({0, 0})->Args({0, 6})->Args({1, 6})->Unit(benchmark::kMillisecond);

void BM_Hungarian(benchmark::State& state) {
  const auto n = static_cast<Eigen::Index>(state.range(0));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  Eigen::MatrixXd cost(n, n);
  for (Eigen::Index i = 0; i < cost.size(); ++i) cost.data()[i] = u(rng);
  for (auto _ : state) benchmark::DoNotOptimize(hungarian_match(cost).cost);
}
BENCHMARK(BM_Hungarian)->Arg(6)->Arg(32)->Arg(128);

void BM_ClusterVocabulary(benchmark::State& state) {
  const auto scenes = scenes_for(static_cast<int>(state.range(0)), 0);
  std::vector<Trajectory> trajs;
  for (const Scene& s : scenes) trajs.push_back(s.expert.future_traj);
  for (auto _ : state) benchmark::DoNotOptimize(cluster_vocabulary(trajs, 32, 0).modes.size());
}
BENCHMARK(BM_ClusterVocabulary)->Arg(200)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace distill

BENCHMARK_MAIN();
