#pragma once

#include "distill/config.hpp"
#include "distill/decoder.hpp"
#include "distill/distillation.hpp"
#include "distill/encoders.hpp"
#include "distill/generative.hpp"
#include "distill/imitation_head.hpp"
#include "distill/rl.hpp"

#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

namespace distill {

enum class Phase { Teacher, Student };
std::string_view to_string(Phase phase);
Phase parse_phase(std::string_view text);

// Non-differentiable tensors derived from one scene. Track 0 is the ego; the
// remaining tracks are the agents valid at the current frame.
struct SceneInputs {
  TrackBatch tracks;
  std::vector<int> agent_index;  // scene agent index of each agent token
  Mat map_points;
  std::vector<PolylineLabel> map_labels;
  std::vector<Vec2> map_centers;

  int agent_count() const { return static_cast<int>(agent_index.size()); }
};
SceneInputs prepare_inputs(const Scene& scene);

// Bridge settings for one student forward pass.
struct BridgeContext {
  bool train = false;            // expert-side sampling
  double zeta = 0.5;
  std::uint64_t noise_seed = 0;
  const Scene* clean = nullptr;  // ground truth for the expert and agent futures (train)
  int winner = 0;                // ego token supervised against the expert latent
};

struct BridgeOutput {
  GaussianLatent instances;  // one row per token (ego modes first)
  GaussianLatent targets;    // row 0 expert, then ground-truth agents (train only)
  std::vector<std::pair<int, int>> pairs;  // (token row, target row)
};

struct ForwardResult {
  Var ego_encoded;     // I_E + ego feature, N_E x D
  Var agents_encoded;  // I_A
  Var map_encoded;     // I_M
  Var ego_decoded;     // after the map stage
  Var agents_decoded;
  PlanOutput plan;
  std::optional<BridgeOutput> bridge;
};

// Teacher and student share this architecture; the student additionally owns
// the generative bridge and the distillation adapter.
class Planner {
 public:
  Planner(const ModelConfig& config, PlanningVocabulary vocab, Phase phase, double gamma, std::uint64_t seed);
  Planner(Planner&&) = default;
  Planner& operator=(Planner&&) = default;

  // `bridge` == nullptr skips the generative bridge.
  ForwardResult forward(Tape& tape, const SceneInputs& inputs, const BridgeContext* bridge = nullptr) const;
  MemoryBank build_memory(Tape& tape, const SceneInputs& inputs, const AgentEncoder::Output& encoded) const;

  nn::ParameterStore& parameters() { return store_; }
  const nn::ParameterStore& parameters() const { return store_; }
  const ModelConfig& config() const { return config_; }
  const PlanningVocabulary& vocabulary() const { return vocab_; }
  Phase phase() const { return phase_; }

  const QNetworks& q_networks() const { return q_; }
  QNetworks& q_networks() { return q_; }
  const RewardWeights& reward_weights() const { return reward_; }
  const Adapter& adapter() const { return adapter_; }
  const GenerativeBridge& bridge() const { return bridge_; }
  const PlanningDecoder& decoder() const { return decoder_; }
  const ImitationHead& head() const { return head_; }

 private:
  ModelConfig config_;
  PlanningVocabulary vocab_;
  Phase phase_;
  nn::ParameterStore store_;

  PositionProjection pos_;
  AgentEncoder agents_;
  MapEncoder map_;
  EgoVocabEncoder vocab_enc_;
  PlanningDecoder decoder_;
  ImitationHead head_;
  QNetworks q_;
  RewardWeights reward_;
  GenerativeBridge bridge_;  // student only
  Adapter adapter_;          // student only
};

// Displacement row of an agent's future centers relative to its current position.
Mat agent_future_row(const Scene& scene, int agent);

}  // namespace distill
