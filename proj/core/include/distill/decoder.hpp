#pragma once

#include "distill/encoders.hpp"

#include <deque>
#include <vector>

namespace distill {

// FIFO store of the last `capacity` frames of instance features and their
// position embeddings, one row per token.
class MemoryBank {
 public:
  struct Frame {
    Mat instances;
    Mat embeddings;
    std::vector<bool> valid;  // per token
  };

  explicit MemoryBank(int capacity = 4) : capacity_(capacity) {}

  // Appends a frame, evicting the oldest beyond capacity. All tokens valid when
  // `valid` is empty.
  void update(const Mat& instances, const Mat& embeddings, std::vector<bool> valid = {});

  int capacity() const { return capacity_; }
  int occupancy() const { return static_cast<int>(frames_.size()); }
  bool empty() const { return frames_.empty(); }
  const std::deque<Frame>& frames() const { return frames_; }
  Eigen::Index tokens() const { return frames_.empty() ? 0 : frames_.front().instances.rows(); }

 private:
  int capacity_;
  std::deque<Frame> frames_;
};

// One decoder stage: attention + residual, then feed-forward + residual.
class DecoderStage {
 public:
  DecoderStage() = default;
  DecoderStage(nn::ParameterStore& store, const std::string& name, const ModelConfig& config, nn::Rng& rng);

  Var operator()(Tape& tape, Var x, Var query, Var key, Var value, const Mask& allowed) const;

 private:
  nn::MultiHeadAttention attn_;
  nn::Mlp ffn_;
};

struct DecoderInputs {
  Var ego;         // N_E x D
  Var ego_pe;      // N_E x D
  Var agents;      // N_A x D (may have zero rows)
  Var agents_pe;   // N_A x D
  std::vector<bool> agent_valid;  // empty means all valid
  Var map;         // N_M x D (may have zero rows)
  Var map_pe;      // N_M x D
};

struct DecoderOutputs {
  Var ego;
  Var agents;
};

// Temporal, agent and map stages over the concatenated ego + agent tokens.
class PlanningDecoder {
 public:
  PlanningDecoder() = default;
  PlanningDecoder(nn::ParameterStore& store, const std::string& name, const ModelConfig& config, nn::Rng& rng);

  // The bank layout must be N_E + N_A tokens. An empty bank or map skips the stage.
  Var temporal_stage(Tape& tape, Var x, Var pe, const MemoryBank& bank) const;
  Var agent_stage(Tape& tape, Var x, Var pe, const std::vector<bool>& key_valid) const;
  Var map_stage(Tape& tape, Var x, Var pe, Var map, Var map_pe) const;

  DecoderOutputs operator()(Tape& tape, const DecoderInputs& in, const MemoryBank& bank) const;

 private:
  DecoderStage temporal_;
  DecoderStage agent_;
  DecoderStage map_;
};

}  // namespace distill
