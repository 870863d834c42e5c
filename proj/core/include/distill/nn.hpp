#pragma once

#include "distill/autodiff.hpp"

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace distill::nn {

using ad::Mat;
using ad::Parameter;
using ad::Tape;
using ad::Var;
using Rng = std::mt19937_64;

// Owns parameters with stable addresses, in creation order.
class ParameterStore {
 public:
  ParameterStore() = default;
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;
  ParameterStore(ParameterStore&&) = default;
  ParameterStore& operator=(ParameterStore&&) = default;

  Parameter& create(std::string name, Mat init);
  Parameter& at(std::string_view name);
  const Parameter& at(std::string_view name) const;
  Parameter* find(std::string_view name);

  std::size_t size() const { return params_.size(); }
  std::size_t scalar_count() const;
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  void set_frozen(bool frozen);
  bool all_finite() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
};

enum class Init { Uniform, Zero };

// y = x W + b with W stored as in x out.
class Linear {
 public:
  Linear() = default;
  Linear(ParameterStore& store, const std::string& name, int in, int out, Rng& rng,
         Init init = Init::Uniform);

  Var operator()(Tape& tape, Var x) const;
  int in() const { return in_; }
  int out() const { return out_; }
  Parameter& weight() const { return *w_; }
  Parameter& bias() const { return *b_; }

 private:
  Parameter* w_ = nullptr;
  Parameter* b_ = nullptr;
  int in_ = 0;
  int out_ = 0;
};

// Linear -> ReLU -> Linear.
class Mlp {
 public:
  Mlp() = default;
  Mlp(ParameterStore& store, const std::string& name, int in, int hidden, int out, Rng& rng,
      Init last = Init::Uniform);

  Var operator()(Tape& tape, Var x) const;
  const Linear& first() const { return first_; }
  const Linear& last() const { return last_; }

 private:
  Linear first_;
  Linear last_;
};

// Projection-only multi-head attention: softmax((q Wq)(k Wk)^T / sqrt(d_h)) (v Wv) Wo.
// No biases, so a query with no readable key contributes exactly zero.
class MultiHeadAttention {
 public:
  MultiHeadAttention() = default;
  MultiHeadAttention(ParameterStore& store, const std::string& name, int dim, int heads, Rng& rng);

  Var operator()(Tape& tape, Var query, Var key, Var value, const ad::Mask& allowed) const;
  Parameter& output() const { return *wo_; }

 private:
  Parameter* wq_ = nullptr;
  Parameter* wk_ = nullptr;
  Parameter* wv_ = nullptr;
  Parameter* wo_ = nullptr;
  int heads_ = 1;
};

Mat uniform(int rows, int cols, double bound, Rng& rng);
Mat normal(int rows, int cols, double stddev, Rng& rng);

}  // namespace distill::nn
