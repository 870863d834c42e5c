#include "fixtures.hpp"

#include <random>

namespace distill::testkit {

ModelConfig tiny_model() {
  ModelConfig m;
  m.dim = 16;
  m.heads = 2;
  m.ffn_hidden = 8;
  m.latent_dim = 4;
  m.levels = 2;
  m.conv_channels = 3;
  m.q_hidden = 6;
  return m;
}

TrainingConfig tiny_config(int modes) {
  TrainingConfig c;
  c.model = tiny_model();
  c.vocabulary.mode_count = modes;
  c.vocabulary.soft_neighbors = std::min(2, modes - 1);
  c.teacher_epochs = 2;
  c.student_epochs = 2;
  c.threads = 1;
  return c;
}

std::vector<Scene> make_scenes(int count, std::uint64_t seed, int agents) {
  GeneratorSpec spec;
  spec.agent_count = agents;
  std::vector<Scene> scenes;
  for (int i = 0; i < count; ++i) scenes.push_back(generate_scene(seed * 1000003 + static_cast<std::uint64_t>(i), spec));
  return scenes;
}

PlanningVocabulary make_vocab(const std::vector<Scene>& scenes, int modes, std::uint64_t seed) {
  std::vector<Trajectory> trajs;
  for (const Scene& s : scenes) trajs.push_back(s.expert.future_traj);
  return cluster_vocabulary(trajs, modes, seed);
}

ad::Mat random_mat(int rows, int cols, std::uint64_t seed, double scale) {
  nn::Rng rng(seed);
  return nn::normal(rows, cols, scale, rng);
}

void jitter(nn::ParameterStore& store, double sigma, std::uint64_t seed) {
  nn::Rng rng(seed);
  for (std::size_t i = 0; i < store.size(); ++i) {
    ad::Mat& v = store[i].value;
    v += nn::normal(static_cast<int>(v.rows()), static_cast<int>(v.cols()), sigma, rng);
  }
}

}  // namespace distill::testkit
