#pragma once

#include "distill/config.hpp"
#include "distill/nn.hpp"
#include "distill/scene.hpp"
#include "distill/vocabulary.hpp"

#include <cstdint>
#include <vector>

namespace distill::testkit {

// Small enough for finite differences and second-scale training runs.
ModelConfig tiny_model();
TrainingConfig tiny_config(int modes = 4);

std::vector<Scene> make_scenes(int count, std::uint64_t seed, int agents = 4);
PlanningVocabulary make_vocab(const std::vector<Scene>& scenes, int modes, std::uint64_t seed = 0);

ad::Mat random_mat(int rows, int cols, std::uint64_t seed, double scale = 1.0);

// Adds N(0, sigma) noise to every parameter, so zero-initialized layers carry gradient.
void jitter(nn::ParameterStore& store, double sigma, std::uint64_t seed);

}  // namespace distill::testkit
