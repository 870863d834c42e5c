#include "distill/generative.hpp"

#include "distill/error.hpp"
#include "distill/imitation_head.hpp"

#include <cmath>

namespace distill {

namespace {

constexpr int kKernel = 3;
constexpr double kLogSigmaInitScale = 0.01;

}  // namespace

GaussianConvEncoder::GaussianConvEncoder(nn::ParameterStore& store, const std::string& name, int length,
                                         int in_channels, int hidden_channels, int latent_dim, nn::Rng& rng)
    : length_(length), hidden_(hidden_channels) {
  const double b1 = 1.0 / std::sqrt(static_cast<double>(kKernel * in_channels));
  const double b2 = 1.0 / std::sqrt(static_cast<double>(kKernel * hidden_channels));
  w1_ = &store.create(name + ".conv0.w", nn::uniform(kKernel * in_channels, hidden_channels, b1, rng));
  b1_ = &store.create(name + ".conv0.b", nn::uniform(1, hidden_channels, b1, rng));
  w2_ = &store.create(name + ".conv1.w", nn::uniform(kKernel * hidden_channels, hidden_channels, b2, rng));
  b2_ = &store.create(name + ".conv1.b", nn::uniform(1, hidden_channels, b2, rng));
  mu_ = nn::Linear(store, name + ".mu", length * hidden_channels, latent_dim, rng);
  log_sigma_ = nn::Linear(store, name + ".log_sigma", length * hidden_channels, latent_dim, rng);
  log_sigma_.weight().value *= kLogSigmaInitScale;
  log_sigma_.bias().value.setZero();
}

GaussianLatent GaussianConvEncoder::operator()(Tape& tape, Var x) const {
  if (x.rows() % length_ != 0) throw InputError("sequence rows are not a multiple of the encoder length");
  const Eigen::Index count = x.rows() / length_;
  Var h = ad::relu(ad::conv1d(x, length_, tape.param(*w1_), tape.param(*b1_), kKernel));
  h = ad::relu(ad::conv1d(h, length_, tape.param(*w2_), tape.param(*b2_), kKernel));
  h = ad::reshape(h, count, static_cast<Eigen::Index>(length_) * hidden_);
  return {mu_(tape, h), log_sigma_(tape, h)};
}

MultiLevelInstances build_levels(Var tokens, int levels) {
  if (levels <= 0 || tokens.cols() % levels != 0)
    throw ConfigError("model.levels", "level count must divide the feature width");
  MultiLevelInstances out;
  const Eigen::Index width = tokens.cols() / levels;
  for (int l = 0; l < levels; ++l) out.levels.push_back(ad::slice_cols(tokens, l * width, width));
  return out;
}

Var merge_levels(const MultiLevelInstances& levels) { return ad::concat_cols(levels.levels); }

Var sample_guided(Var mu, Var log_sigma, double zeta, const Mat& noise) {
  Tape& tape = *mu.tape();
  if (noise.rows() != mu.rows() || noise.cols() != mu.cols()) throw InputError("noise shape does not match latent");
  return mu + ad::cmul(tape.constant(noise), ad::exp(ad::scale(log_sigma, zeta)));
}

double gaussian_kl(double mu_i, double s_i, double mu_f, double s_f) {
  const double dm = mu_f - mu_i;
  return s_f - s_i - 0.5 + 0.5 * (std::exp(2.0 * (s_i - s_f)) + dm * dm * std::exp(-2.0 * s_f));
}

Var loss_distribution(const GaussianLatent& inst, const GaussianLatent& traj) {
  if (inst.mu.rows() != traj.mu.rows() || inst.mu.cols() != traj.mu.cols())
    throw InputError("latent shapes differ");
  const Var ds = traj.log_sigma - inst.log_sigma;
  const Var dm = traj.mu - inst.mu;
  const Var ratio = ad::exp(ad::scale(ds, -2.0));
  const Var spread = ad::cmul(ad::square(dm), ad::exp(ad::scale(traj.log_sigma, -2.0)));
  return ad::mean(ad::add_scalar(ds + ad::scale(ratio + spread, 0.5), -0.5));
}

Var loss_distribution(const GaussianLatent& inst, const GaussianLatent& traj,
                      std::span<const std::pair<int, int>> pairs) {
  if (pairs.empty()) throw InputError("no matched latent pairs");
  std::vector<int> ri, rf;
  for (const auto& [i, f] : pairs) {
    if (i < 0 || i >= inst.mu.rows()) throw InputError("unmatched instance row " + std::to_string(i));
    if (f < 0 || f >= traj.mu.rows()) throw InputError("unmatched trajectory row " + std::to_string(f));
    ri.push_back(i);
    rf.push_back(f);
  }
  return loss_distribution({ad::gather_rows(inst.mu, ri), ad::gather_rows(inst.log_sigma, ri)},
                           {ad::gather_rows(traj.mu, rf), ad::gather_rows(traj.log_sigma, rf)});
}

GenerativeBridge::GenerativeBridge(nn::ParameterStore& store, const std::string& name, const ModelConfig& config,
                                   nn::Rng& rng)
    : levels_(config.levels), latent_(config.latent_dim), dim_(config.dim) {
  if (config.dim % kInstanceSequence != 0)
    throw ConfigError("model.dim", "must be a multiple of " + std::to_string(kInstanceSequence));
  if (config.levels <= 0 || config.dim % config.levels != 0)
    throw ConfigError("model.levels", "level count must divide the feature width");
  const int width = config.dim / config.levels;
  traj_enc_ = GaussianConvEncoder(store, name + ".traj_enc", kFutureSteps, 2, config.conv_channels,
                                  config.latent_dim, rng);
  inst_enc_ = GaussianConvEncoder(store, name + ".inst_enc", kInstanceSequence, config.dim / kInstanceSequence,
                                  config.conv_channels, config.latent_dim, rng);
  const int in = config.latent_dim + width;
  wz_ = nn::Linear(store, name + ".gru.wz", in, width, rng);
  wr_ = nn::Linear(store, name + ".gru.wr", in, width, rng);
  wh_ = nn::Linear(store, name + ".gru.wh", in, width, rng);
  uz_ = nn::Linear(store, name + ".gru.uz", width, width, rng);
  ur_ = nn::Linear(store, name + ".gru.ur", width, width, rng);
  uh_ = nn::Linear(store, name + ".gru.uh", width, width, rng);
  proj_ = nn::Linear(store, name + ".proj", config.dim, config.dim, rng, nn::Init::Zero);
}

GaussianLatent GenerativeBridge::encode_trajectories(Tape& tape, const Mat& displacements) const {
  if (displacements.cols() != kTrajCols) throw InputError("trajectory rows must hold 6 displacements");
  return traj_enc_(tape, tape.constant(ad::Mat(Eigen::Map<const Mat>(displacements.data(),
                                                                         displacements.rows() * kFutureSteps, 2))));
}

GaussianLatent GenerativeBridge::encode_instances(Tape& tape, Var tokens) const {
  return inst_enc_(tape, ad::reshape(tokens, tokens.rows() * kInstanceSequence, tokens.cols() / kInstanceSequence));
}

Var GenerativeBridge::fuse(Tape& tape, Var guided, Var tokens) const {
  if (guided.rows() != tokens.rows()) throw InputError("guided features and tokens differ in count");
  const MultiLevelInstances levels = build_levels(tokens, levels_);
  MultiLevelInstances out;
  Var prev = tape.constant(Mat::Zero(tokens.rows(), tokens.cols() / levels_));
  for (const Var& h : levels.levels) {
    const Var parts[] = {guided, prev};
    const Var x = ad::concat_cols(parts);
    const Var z = ad::sigmoid(wz_(tape, x) + uz_(tape, h));
    const Var r = ad::sigmoid(wr_(tape, x) + ur_(tape, h));
    const Var cand = ad::tanh(wh_(tape, x) + uh_(tape, ad::cmul(r, h)));
    // h' = h + z * (cand - h)
    prev = h + ad::cmul(z, cand - h);
    out.levels.push_back(prev);
  }
  return tokens + proj_(tape, merge_levels(out));
}

}  // namespace distill
