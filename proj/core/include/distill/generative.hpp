#pragma once

#include "distill/encoders.hpp"
#include "distill/hungarian.hpp"

#include <span>
#include <utility>
#include <vector>

namespace distill {

// Diagonal Gaussian; log_sigma is the log standard deviation.
struct GaussianLatent {
  Var mu;         // count x D_z
  Var log_sigma;  // count x D_z
};

// Two 1-D convolutions (kernel 3, ReLU) over a sequence, then linear heads for mu and log sigma.
class GaussianConvEncoder {
 public:
  GaussianConvEncoder() = default;
  GaussianConvEncoder(nn::ParameterStore& store, const std::string& name, int length, int in_channels,
                      int hidden_channels, int latent_dim, nn::Rng& rng);

  // x stacks `count` sequences: (count * length) x in_channels.
  GaussianLatent operator()(Tape& tape, Var x) const;
  int length() const { return length_; }

 private:
  ad::Parameter* w1_ = nullptr;
  ad::Parameter* b1_ = nullptr;
  ad::Parameter* w2_ = nullptr;
  ad::Parameter* b2_ = nullptr;
  nn::Linear mu_;
  nn::Linear log_sigma_;
  int length_ = 0;
  int hidden_ = 0;
};

struct MultiLevelInstances {
  std::vector<Var> levels;  // L entries of count x D'
};

// Splits each D-wide token into L consecutive D/L-wide chunks.
MultiLevelInstances build_levels(Var tokens, int levels);
Var merge_levels(const MultiLevelInstances& levels);

// F_G = mu + n * exp(zeta * log_sigma)
Var sample_guided(Var mu, Var log_sigma, double zeta, const Mat& noise);

// Mean over rows and latent dims of KL(N(mu_I, e^{2 s_I}) || N(mu_F, e^{2 s_F})).
Var loss_distribution(const GaussianLatent& inst, const GaussianLatent& traj);
// Same, over (instance row, trajectory row) pairs.
Var loss_distribution(const GaussianLatent& inst, const GaussianLatent& traj,
                      std::span<const std::pair<int, int>> pairs);
double gaussian_kl(double mu_i, double log_sigma_i, double mu_f, double log_sigma_f);

inline constexpr int kInstanceSequence = 8;  // tokens enter the instance encoder as 8 x (D/8)

class GenerativeBridge {
 public:
  GenerativeBridge() = default;
  GenerativeBridge(nn::ParameterStore& store, const std::string& name, const ModelConfig& config, nn::Rng& rng);

  // displacements: count x kTrajCols
  GaussianLatent encode_trajectories(Tape& tape, const Mat& displacements) const;
  GaussianLatent encode_instances(Tape& tape, Var tokens) const;

  // GRU over the level axis: level l reads [F_G, output of level l-1] with I_G[l]
  // as hidden state; the concatenated outputs pass a projection added to the tokens.
  Var fuse(Tape& tape, Var guided, Var tokens) const;

  int levels() const { return levels_; }
  int latent_dim() const { return latent_; }
  const nn::Linear& projection() const { return proj_; }

 private:
  GaussianConvEncoder traj_enc_;
  GaussianConvEncoder inst_enc_;
  nn::Linear wz_, wr_, wh_;
  nn::Linear uz_, ur_, uh_;
  nn::Linear proj_;
  int levels_ = 1;
  int latent_ = 0;
  int dim_ = 0;
};

}  // namespace distill
