#include "distill/encoders.hpp"

#include "distill/error.hpp"

#include <cmath>
#include <random>

namespace distill {

namespace {

constexpr double kMapInputScale = 0.1;

void require_even(int dim) {
  if (dim <= 0 || dim % 2 != 0) throw ConfigError("model.dim", "sinusoidal encoding needs an even width");
}

void encode_into(double pos, int dim, double* out) {
  for (int j = 0; j < dim; j += 2) {
    const double arg = pos / std::pow(10000.0, 2.0 * j / dim);
    out[j] = std::sin(arg);
    if (j + 1 < dim) out[j + 1] = std::cos(arg);
  }
}

}  // namespace

Mat sinusoidal_encode(std::span<const double> positions, int dim) {
  require_even(dim);
  Mat out(static_cast<Eigen::Index>(positions.size()), dim);
  for (std::size_t i = 0; i < positions.size(); ++i) encode_into(positions[i], dim, out.row(i).data());
  return out;
}

Mat sinusoidal_encode(std::span<const Vec2> positions, int dim) {
  require_even(dim);
  const int half = dim / 2;
  Mat out(static_cast<Eigen::Index>(positions.size()), dim);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    encode_into(positions[i].x(), half, out.row(i).data());
    encode_into(positions[i].y(), half, out.row(i).data() + half);
  }
  return out;
}

TrackBatch make_track_batch(std::span<const AgentTrack> tracks) {
  TrackBatch b;
  const auto n = static_cast<Eigen::Index>(tracks.size());
  b.deltas = Mat::Zero(n * kTrackLength, kDeltaDim);
  b.step_mask = Mask::Constant(n, kTrackLength, false);
  for (Eigen::Index i = 0; i < n; ++i) {
    const AgentTrack& track = tracks[i];
    if (static_cast<int>(track.states.size()) != kTrackLength)
      throw InputError("track " + std::to_string(track.agent_id) + " has " + std::to_string(track.states.size()) +
                       " states, expected " + std::to_string(kTrackLength));
    const auto deltas = vectorize_track(track);
    std::vector<Vec2> pos;
    for (int t = 0; t < kTrackLength; ++t) {
      const auto row = deltas[t].as_array();
      for (int c = 0; c < kDeltaDim; ++c) b.deltas(i * kTrackLength + t, c) = row[c];
      b.step_mask(i, t) = track.states[t].mask;
      pos.push_back(track.states[t].position);
    }
    b.current_positions.push_back(track.current().position);
    b.positions.push_back(std::move(pos));
  }
  return b;
}

PositionProjection::PositionProjection(nn::ParameterStore& store, const std::string& name, int dim, nn::Rng& rng)
    : proj_(store, name, dim, dim, rng), dim_(dim) {}

Var PositionProjection::operator()(Tape& tape, std::span<const Vec2> positions) const {
  return ad::relu(proj_(tape, tape.constant(sinusoidal_encode(positions, dim_))));
}

AgentEncoder::AgentEncoder(nn::ParameterStore& store, const std::string& name, const ModelConfig& config,
                           nn::Rng& rng)
    : embed_(store, name + ".embed", kDeltaDim, config.dim, config.dim, rng),
      attn_(store, name + ".attn", config.dim, config.heads, rng) {
  std::vector<double> steps;
  for (int t = 0; t < kTrackLength; ++t) steps.push_back(t);
  temporal_ = sinusoidal_encode(steps, config.dim);
}

AgentEncoder::Output AgentEncoder::operator()(Tape& tape, const TrackBatch& batch) const {
  const int n = batch.tracks();
  const Eigen::Index rows = static_cast<Eigen::Index>(n) * kTrackLength;
  if (!batch.deltas.allFinite()) throw NumericError("non-finite agent state deltas");

  Mat x = batch.deltas;
  Mask allowed = Mask::Constant(rows, rows, false);
  Mat te(rows, temporal_.cols());
  for (int i = 0; i < n; ++i) {
    for (int t = 0; t < kTrackLength; ++t) {
      const Eigen::Index r = static_cast<Eigen::Index>(i) * kTrackLength + t;
      if (!batch.step_mask(i, t)) x.row(r).setZero();
      te.row(r) = temporal_.row(t);
      for (int s = 0; s < kTrackLength; ++s)
        allowed(r, static_cast<Eigen::Index>(i) * kTrackLength + s) = batch.step_mask(i, s);
    }
  }

  Output out;
  out.embedding = embed_(tape, tape.constant(std::move(x)));
  const Var qk = out.embedding + tape.constant(std::move(te));
  out.steps = out.embedding + attn_(tape, qk, qk, out.embedding, allowed);
  std::vector<int> current;
  for (int i = 0; i < n; ++i) current.push_back(i * kTrackLength + kTrackLength - 1);
  out.current = ad::gather_rows(out.steps, current);
  return out;
}

Mat map_point_features(const MapFeatureSet& f) {
  const auto n = static_cast<Eigen::Index>(f.vectors.size());
  Mat out(n, MapEncoder::kPointFeatures);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Vec2& d = f.deviations[static_cast<std::size_t>(i) + 1];
    out.row(i) << f.vectors[i].x() * kMapInputScale, f.vectors[i].y() * kMapInputScale, f.headings[i],
        d.x() * kMapInputScale, d.y() * kMapInputScale;
  }
  return out;
}

MapEncoder::MapEncoder(nn::ParameterStore& store, const std::string& name, const ModelConfig& config,
                       nn::Rng& rng)
    : point_(store, name + ".point", kPointFeatures, config.dim, config.dim, rng) {
  labels_ = &store.create(name + ".labels", nn::uniform(kLabelCount, config.dim, 0.1, rng));
}

Var MapEncoder::operator()(Tape& tape, const Mat& points, std::span<const PolylineLabel> labels) const {
  const auto count = static_cast<Eigen::Index>(labels.size());
  if (count == 0) return tape.constant(Mat::Zero(0, labels_->value.cols()));
  if (points.rows() % count != 0) throw InputError("map point rows do not split evenly across polylines");
  std::vector<int> label_rows;
  for (PolylineLabel l : labels) {
    const int idx = static_cast<int>(l);
    if (idx < 0 || idx >= kLabelCount) throw InputError("unknown polyline label " + std::to_string(idx));
    label_rows.push_back(idx);
  }
  const Var pooled = ad::max_pool_rows(point_(tape, tape.constant(points)), points.rows() / count);
  return pooled + ad::gather_rows(tape.param(*labels_), label_rows);
}

std::vector<Vec2> mode_segments(const Trajectory& mode) {
  std::vector<Vec2> out;
  for (std::size_t t = 1; t < mode.size(); ++t) out.push_back(mode[t] - mode[t - 1]);
  return out;
}

EgoVocabEncoder::EgoVocabEncoder(nn::ParameterStore& store, const std::string& name, const ModelConfig& config,
                                 nn::Rng& rng)
    : lift_(store, name + ".lift", (kFutureSteps - 1) * config.dim, config.dim, rng), dim_(config.dim) {}

std::pair<Var, Var> EgoVocabEncoder::operator()(Tape& tape, const PlanningVocabulary& vocab,
                                                const PositionProjection& pos) const {
  const int n = vocab.size();
  Mat lifted(n, (kFutureSteps - 1) * dim_);
  for (int i = 0; i < n; ++i) {
    const auto segments = mode_segments(vocab.modes[i]);
    if (static_cast<int>(segments.size()) != kFutureSteps - 1)
      throw InputError("vocabulary modes must have " + std::to_string(kFutureSteps) + " points");
    const Mat enc = sinusoidal_encode(std::span<const Vec2>(segments), dim_);
    lifted.row(i) = Eigen::Map<const Eigen::RowVectorXd>(enc.data(), enc.size());
  }
  const Var ie = lift_(tape, tape.constant(std::move(lifted)));
  return {ie, pos(tape, vocab.endpoints)};
}

Scene perturb_instances(const Scene& scene, const NoiseSpec& noise, std::uint64_t seed) {
  noise.validate();
  Scene out = scene;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (AgentTrack& track : out.agent_tracks) {
    const bool drop = coin(rng) < noise.dropout;
    for (AgentState& s : track.states) {
      const double nx = gauss(rng), ny = gauss(rng), nyaw = gauss(rng);
      if (!s.mask) continue;
      if (drop) {
        s = AgentState{};
        continue;
      }
      s.position += Vec2(nx, ny) * noise.position_sigma;
      s.yaw = wrap_angle(s.yaw + nyaw * noise.yaw_sigma);
    }
  }
  return out;
}

}  // namespace distill
