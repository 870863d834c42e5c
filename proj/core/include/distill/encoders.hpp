#pragma once

#include "distill/config.hpp"
#include "distill/nn.hpp"
#include "distill/scene.hpp"
#include "distill/vocabulary.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace distill {

using ad::Mat;
using ad::Mask;
using ad::Tape;
using ad::Var;

enum class InstanceKind { Ego, Agent, Map };

struct InstanceFeatures {
  InstanceKind kind = InstanceKind::Agent;
  Var values;              // count x D
  Var position_embedding;  // count x D
};

// Row j of the result: even columns sin(pos / 10000^(2k/D)), odd columns cos
// of the same argument, where k is the even column of the pair.
Mat sinusoidal_encode(std::span<const double> positions, int dim);
// Each coordinate takes dim/2 columns; x first.
Mat sinusoidal_encode(std::span<const Vec2> positions, int dim);

// Agent tracks stacked for the encoder: track i occupies rows [i*T, (i+1)*T).
struct TrackBatch {
  Mat deltas;      // (tracks * kTrackLength) x kDeltaDim
  Mask step_mask;  // tracks x kTrackLength
  std::vector<Vec2> current_positions;
  std::vector<std::vector<Vec2>> positions;  // per track, per step

  int tracks() const { return static_cast<int>(step_mask.rows()); }
};
TrackBatch make_track_batch(std::span<const AgentTrack> tracks);

// Sinusoidal lift followed by Linear + ReLU; shared by agents, map and vocabulary.
class PositionProjection {
 public:
  PositionProjection() = default;
  PositionProjection(nn::ParameterStore& store, const std::string& name, int dim, nn::Rng& rng);
  Var operator()(Tape& tape, std::span<const Vec2> positions) const;

 private:
  nn::Linear proj_;
  int dim_ = 0;
};

class AgentEncoder {
 public:
  struct Output {
    Var embedding;  // E: per-step embeddings, (tracks * T) x D
    Var steps;      // per-step outputs after attention, (tracks * T) x D
    Var current;    // I_A: the current-frame rows, tracks x D
  };

  AgentEncoder() = default;
  AgentEncoder(nn::ParameterStore& store, const std::string& name, const ModelConfig& config, nn::Rng& rng);

  Output operator()(Tape& tape, const TrackBatch& batch) const;

 private:
  nn::Mlp embed_;
  nn::MultiHeadAttention attn_;
  Mat temporal_;  // T x D step encoding
};

// Per-point features for one polyline: (N_P - 1) rows of [v.x, v.y, heading, d.x, d.y],
// pairing segment i with the deviation of its end point.
Mat map_point_features(const MapFeatureSet& features);

class MapEncoder {
 public:
  static constexpr int kPointFeatures = 5;

  MapEncoder() = default;
  MapEncoder(nn::ParameterStore& store, const std::string& name, const ModelConfig& config, nn::Rng& rng);

  // `points` stacks map_point_features of every polyline; `labels` has one entry each.
  Var operator()(Tape& tape, const Mat& points, std::span<const PolylineLabel> labels) const;
  ad::Parameter& label_table() const { return *labels_; }

 private:
  nn::Mlp point_;
  ad::Parameter* labels_ = nullptr;  // kLabelCount x D
};

// Segment vectors of a mode, (T - 1) x 2.
std::vector<Vec2> mode_segments(const Trajectory& mode);

class EgoVocabEncoder {
 public:
  EgoVocabEncoder() = default;
  EgoVocabEncoder(nn::ParameterStore& store, const std::string& name, const ModelConfig& config, nn::Rng& rng);

  // Returns (I_E, PE_E), both N_E x D.
  std::pair<Var, Var> operator()(Tape& tape, const PlanningVocabulary& vocab, const PositionProjection& pos) const;

 private:
  nn::Linear lift_;
  int dim_ = 0;
};

// Student-side degradation of agent tracks; the ego track and map stay intact.
Scene perturb_instances(const Scene& scene, const NoiseSpec& noise, std::uint64_t seed);

}  // namespace distill
