#include "distill/planner.hpp"

#include "distill/error.hpp"
#include "distill/hungarian.hpp"

#include <random>

namespace distill {

std::string_view to_string(Phase phase) { return phase == Phase::Teacher ? "teacher" : "student"; }

Phase parse_phase(std::string_view text) {
  if (text == "teacher") return Phase::Teacher;
  if (text == "student") return Phase::Student;
  throw InputError("unknown phase '" + std::string(text) + "'");
}

SceneInputs prepare_inputs(const Scene& scene) {
  SceneInputs in;
  std::vector<AgentTrack> tracks{scene.ego_track};
  for (std::size_t i = 0; i < scene.agent_tracks.size(); ++i) {
    if (!scene.agent_tracks[i].valid()) continue;
    tracks.push_back(scene.agent_tracks[i]);
    in.agent_index.push_back(static_cast<int>(i));
  }
  in.tracks = make_track_batch(tracks);

  std::vector<Mat> blocks;
  Eigen::Index rows = 0;
  for (const MapPolyline& pl : scene.map) {
    if (!pl.valid) continue;
    const MapFeatureSet f = derive_map_features(pl);
    blocks.push_back(map_point_features(f));
    rows += blocks.back().rows();
    in.map_labels.push_back(pl.label);
    in.map_centers.push_back(f.center);
  }
  in.map_points.resize(rows, MapEncoder::kPointFeatures);
  Eigen::Index at = 0;
  for (const Mat& b : blocks) {
    if (b.rows() != blocks.front().rows()) throw InputError("map polylines differ in point count");
    in.map_points.middleRows(at, b.rows()) = b;
    at += b.rows();
  }
  return in;
}

Mat agent_future_row(const Scene& scene, int agent) {
  const Vec2 origin = scene.agent_tracks.at(static_cast<std::size_t>(agent)).current().position;
  Trajectory rel;
  Vec2 last = origin;
  for (const AgentBox& box : scene.agent_futures.at(static_cast<std::size_t>(agent))) {
    if (box.valid) last = box.center;
    rel.push_back(last - origin);
  }
  if (static_cast<int>(rel.size()) != kFutureSteps) throw InputError("agent future has the wrong horizon");
  return displacement_row(rel);
}

Planner::Planner(const ModelConfig& config, PlanningVocabulary vocab, Phase phase, double gamma, std::uint64_t seed)
    : config_(config), vocab_(std::move(vocab)), phase_(phase) {
  config_.validate();
  if (vocab_.size() == 0) throw InputError("planning vocabulary is empty");
  nn::Rng rng(seed);
  pos_ = PositionProjection(store_, "pos_proj", config_.dim, rng);
  agents_ = AgentEncoder(store_, "agent_enc", config_, rng);
  map_ = MapEncoder(store_, "map_enc", config_, rng);
  vocab_enc_ = EgoVocabEncoder(store_, "vocab_enc", config_, rng);
  decoder_ = PlanningDecoder(store_, "decoder", config_, rng);
  head_ = ImitationHead(store_, "head", config_, rng);
  q_ = QNetworks(store_, "q", config_, gamma, rng);
  reward_ = RewardWeights(store_, "reward.omega");
  if (phase_ == Phase::Student) {
    bridge_ = GenerativeBridge(store_, "bridge", config_, rng);
    adapter_ = Adapter(store_, "adapter", config_.dim);
  }
}

MemoryBank Planner::build_memory(Tape& tape, const SceneInputs& in, const AgentEncoder::Output& encoded) const {
  MemoryBank bank(config_.memory_frames);
  const int ne = vocab_.size();
  const int na = in.agent_count();
  const Mat& steps = encoded.steps.value();
  for (int t = 0; t < kTrackLength - 1; ++t) {
    std::vector<Vec2> positions;
    for (int k = 0; k <= na; ++k) positions.push_back(in.tracks.positions[k][t]);
    const Mat pe = pos_(tape, positions).value();
    Mat inst(ne + na, config_.dim);
    Mat emb(ne + na, config_.dim);
    std::vector<bool> valid(static_cast<std::size_t>(ne + na));
    for (int r = 0; r < ne + na; ++r) {
      const int track = r < ne ? 0 : r - ne + 1;
      inst.row(r) = steps.row(track * kTrackLength + t);
      emb.row(r) = pe.row(track);
      valid[r] = in.tracks.step_mask(track, t);
    }
    bank.update(inst, emb, std::move(valid));
  }
  return bank;
}

ForwardResult Planner::forward(Tape& tape, const SceneInputs& in, const BridgeContext* bridge) const {
  ForwardResult out;
  const int ne = vocab_.size();
  const int na = in.agent_count();

  const AgentEncoder::Output enc = agents_(tape, in.tracks);
  const Var track_pe = pos_(tape, in.tracks.current_positions);
  const Var ego_feature = ad::slice_rows(enc.current, 0, 1);
  out.agents_encoded = ad::slice_rows(enc.current, 1, na);
  const Var agents_pe = ad::slice_rows(track_pe, 1, na);

  const auto [ie, pe_e] = vocab_enc_(tape, vocab_, pos_);
  out.ego_encoded = ie + ad::broadcast_rows(ego_feature, ne);

  out.map_encoded = map_(tape, in.map_points, in.map_labels);
  const Var map_pe = in.map_labels.empty() ? tape.constant(Mat::Zero(0, config_.dim)) : pos_(tape, in.map_centers);

  const MemoryBank bank = build_memory(tape, in, enc);
  DecoderInputs dec;
  dec.ego = out.ego_encoded;
  dec.ego_pe = pe_e;
  dec.agents = out.agents_encoded;
  dec.agents_pe = agents_pe;
  dec.map = out.map_encoded;
  dec.map_pe = map_pe;
  const DecoderOutputs decoded = decoder_(tape, dec, bank);
  out.ego_decoded = decoded.ego;
  out.agents_decoded = decoded.agents;

  Var ego_final = decoded.ego;
  if (bridge != nullptr) {
    if (phase_ != Phase::Student) throw InputError("the generative bridge belongs to the student");
    const Var parts[] = {decoded.ego, decoded.agents};
    const Var tokens = na > 0 ? ad::concat_rows(parts) : decoded.ego;
    const Eigen::Index n = tokens.rows();
    BridgeOutput b;
    b.instances = bridge_.encode_instances(tape, tokens);

    Mat noise(n, config_.latent_dim);
    std::mt19937_64 rng(bridge->noise_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = gauss(rng);

    Var mu = b.instances.mu;
    Var log_sigma = b.instances.log_sigma;
    if (bridge->train) {
      if (bridge->clean == nullptr) throw InputError("training the bridge needs the clean scene");
      const Scene& gt = *bridge->clean;
      std::vector<int> gt_agents;
      for (std::size_t i = 0; i < gt.agent_tracks.size(); ++i)
        if (gt.agent_tracks[i].valid()) gt_agents.push_back(static_cast<int>(i));
      Mat rows(1 + static_cast<Eigen::Index>(gt_agents.size()), kTrajCols);
      rows.row(0) = displacement_row(gt.expert.future_traj);
      for (std::size_t k = 0; k < gt_agents.size(); ++k) rows.row(1 + k) = agent_future_row(gt, gt_agents[k]);
      b.targets = bridge_.encode_trajectories(tape, rows);

      std::vector<int> source(static_cast<std::size_t>(n), -1);  // target row per token, -1 keeps its own
      for (int e = 0; e < ne; ++e) source[e] = 0;
      b.pairs.emplace_back(bridge->winner, 0);
      if (na > 0 && !gt_agents.empty()) {
        const int rows_n = std::min<int>(na, static_cast<int>(gt_agents.size()));
        Eigen::MatrixXd cost(na, gt_agents.size());
        for (int k = 0; k < na; ++k)
          for (std::size_t g = 0; g < gt_agents.size(); ++g)
            cost(k, g) = (in.tracks.current_positions[1 + k] - gt.agent_tracks[gt_agents[g]].current().position).norm();
        if (rows_n == na) {
          const Assignment a = hungarian_match(cost);
          for (int k = 0; k < na; ++k) {
            source[ne + k] = 1 + a.row_to_col[k];
            b.pairs.emplace_back(ne + k, 1 + a.row_to_col[k]);
          }
        } else {
          const Assignment a = hungarian_match(cost.transpose());
          for (std::size_t g = 0; g < gt_agents.size(); ++g) {
            const int k = a.row_to_col[g];
            source[ne + k] = 1 + static_cast<int>(g);
            b.pairs.emplace_back(ne + k, 1 + static_cast<int>(g));
          }
        }
      }
      std::vector<Var> mus, sigmas;
      for (Eigen::Index r = 0; r < n; ++r) {
        const int s = source[r];
        mus.push_back(s < 0 ? ad::slice_rows(b.instances.mu, r, 1) : ad::slice_rows(b.targets.mu, s, 1));
        sigmas.push_back(s < 0 ? ad::slice_rows(b.instances.log_sigma, r, 1)
                               : ad::slice_rows(b.targets.log_sigma, s, 1));
      }
      mu = ad::concat_rows(mus);
      log_sigma = ad::concat_rows(sigmas);
    }
    const Var guided = sample_guided(mu, log_sigma, bridge->zeta, noise);
    const Var fused = bridge_.fuse(tape, guided, tokens);
    ego_final = ad::slice_rows(fused, 0, ne);
    out.bridge = std::move(b);
  }

  out.plan = head_.predict(tape, ego_final);
  return out;
}

}  // namespace distill
