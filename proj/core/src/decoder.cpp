#include "distill/decoder.hpp"

#include "distill/error.hpp"

namespace distill {

void MemoryBank::update(const Mat& instances, const Mat& embeddings, std::vector<bool> valid) {
  if (instances.rows() != embeddings.rows() || instances.cols() != embeddings.cols())
    throw InputError("memory frame instances and embeddings differ in shape");
  if (!frames_.empty() && (instances.rows() != tokens() || instances.cols() != frames_.front().instances.cols()))
    throw InputError("memory frame layout " + std::to_string(instances.rows()) + "x" +
                     std::to_string(instances.cols()) + " does not match the bank");
  if (valid.empty()) valid.assign(static_cast<std::size_t>(instances.rows()), true);
  if (static_cast<Eigen::Index>(valid.size()) != instances.rows())
    throw InputError("memory validity mask has the wrong length");
  frames_.push_back({instances, embeddings, std::move(valid)});
  while (static_cast<int>(frames_.size()) > capacity_) frames_.pop_front();
}

DecoderStage::DecoderStage(nn::ParameterStore& store, const std::string& name, const ModelConfig& config,
                           nn::Rng& rng)
    : attn_(store, name + ".attn", config.dim, config.heads, rng),
      ffn_(store, name + ".ffn", config.dim, config.ffn_hidden, config.dim, rng) {}

Var DecoderStage::operator()(Tape& tape, Var x, Var query, Var key, Var value, const Mask& allowed) const {
  const Var h = x + attn_(tape, query, key, value, allowed);
  return h + ffn_(tape, h);
}

PlanningDecoder::PlanningDecoder(nn::ParameterStore& store, const std::string& name, const ModelConfig& config,
                                 nn::Rng& rng)
    : temporal_(store, name + ".temporal", config, rng),
      agent_(store, name + ".agent", config, rng),
      map_(store, name + ".map", config, rng) {}

Var PlanningDecoder::temporal_stage(Tape& tape, Var x, Var pe, const MemoryBank& bank) const {
  if (bank.empty()) return x;
  const Eigen::Index n = x.rows();
  if (bank.tokens() != n)
    throw InputError("memory bank holds " + std::to_string(bank.tokens()) + " tokens, decoder has " +
                     std::to_string(n));
  const auto frames = static_cast<Eigen::Index>(bank.occupancy());
  Mat keys(frames * n, x.cols());
  Mat values(frames * n, x.cols());
  Mask allowed = Mask::Constant(n, frames * n, false);
  for (Eigen::Index f = 0; f < frames; ++f) {
    const MemoryBank::Frame& frame = bank.frames()[static_cast<std::size_t>(f)];
    keys.middleRows(f * n, n) = frame.instances + frame.embeddings;
    values.middleRows(f * n, n) = frame.instances;
    for (Eigen::Index i = 0; i < n; ++i) allowed(i, f * n + i) = frame.valid[static_cast<std::size_t>(i)];
  }
  return temporal_(tape, x, x + pe, tape.constant(std::move(keys)), tape.constant(std::move(values)), allowed);
}

Var PlanningDecoder::agent_stage(Tape& tape, Var x, Var pe, const std::vector<bool>& key_valid) const {
  const Eigen::Index n = x.rows();
  Mask allowed = Mask::Constant(n, n, true);
  if (!key_valid.empty()) {
    if (static_cast<Eigen::Index>(key_valid.size()) != n) throw InputError("agent-stage mask has the wrong length");
    for (Eigen::Index j = 0; j < n; ++j)
      if (!key_valid[static_cast<std::size_t>(j)]) allowed.col(j).setConstant(false);
  }
  const Var q = x + pe;
  return agent_(tape, x, q, q, x, allowed);
}

Var PlanningDecoder::map_stage(Tape& tape, Var x, Var pe, Var map, Var map_pe) const {
  if (map.rows() == 0) return x;
  const Mask allowed = Mask::Constant(x.rows(), map.rows(), true);
  return map_(tape, x, x + pe, map + map_pe, map, allowed);
}

DecoderOutputs PlanningDecoder::operator()(Tape& tape, const DecoderInputs& in, const MemoryBank& bank) const {
  const Eigen::Index ne = in.ego.rows();
  const Eigen::Index na = in.agents.valid() ? in.agents.rows() : 0;
  Var x = in.ego;
  Var pe = in.ego_pe;
  if (na > 0) {
    const Var xs[] = {in.ego, in.agents};
    const Var ps[] = {in.ego_pe, in.agents_pe};
    x = ad::concat_rows(xs);
    pe = ad::concat_rows(ps);
  }
  std::vector<bool> key_valid;
  if (!in.agent_valid.empty()) {
    key_valid.assign(static_cast<std::size_t>(ne), true);
    key_valid.insert(key_valid.end(), in.agent_valid.begin(), in.agent_valid.end());
  }
  x = temporal_stage(tape, x, pe, bank);
  x = agent_stage(tape, x, pe, key_valid);
  if (in.map.valid()) x = map_stage(tape, x, pe, in.map, in.map_pe);
  DecoderOutputs out;
  out.ego = na > 0 ? ad::slice_rows(x, 0, ne) : x;
  out.agents = na > 0 ? ad::slice_rows(x, ne, na) : tape.constant(Mat::Zero(0, x.cols()));
  return out;
}

}  // namespace distill
