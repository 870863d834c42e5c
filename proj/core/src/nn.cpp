#include "distill/nn.hpp"

#include "distill/error.hpp"

#include <cmath>

namespace distill::nn {

Parameter& ParameterStore::create(std::string name, Mat init) {
  if (find(name) != nullptr) throw InputError("duplicate parameter name " + name);
  params_.push_back(std::make_unique<Parameter>(Parameter{std::move(name), std::move(init), false}));
  return *params_.back();
}

Parameter* ParameterStore::find(std::string_view name) {
  for (auto& p : params_)
    if (p->name == name) return p.get();
  return nullptr;
}

Parameter& ParameterStore::at(std::string_view name) {
  if (Parameter* p = find(name)) return *p;
  throw InputError("unknown parameter " + std::string(name));
}

const Parameter& ParameterStore::at(std::string_view name) const {
  return const_cast<ParameterStore*>(this)->at(name);
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p->value.size());
  return n;
}

void ParameterStore::set_frozen(bool frozen) {
  for (auto& p : params_) p->frozen = frozen;
}

bool ParameterStore::all_finite() const {
  for (const auto& p : params_)
    if (!p->value.allFinite()) return false;
  return true;
}

Mat uniform(int rows, int cols, double bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Mat normal(int rows, int cols, double stddev, Rng& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = dist(rng);
  return m;
}

Linear::Linear(ParameterStore& store, const std::string& name, int in, int out, Rng& rng, Init init)
    : in_(in), out_(out) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  if (init == Init::Zero) {
    w_ = &store.create(name + ".w", Mat::Zero(in, out));
    b_ = &store.create(name + ".b", Mat::Zero(1, out));
  } else {
    w_ = &store.create(name + ".w", uniform(in, out, bound, rng));
    b_ = &store.create(name + ".b", uniform(1, out, bound, rng));
  }
}

Var Linear::operator()(Tape& tape, Var x) const {
  return ad::add_row(ad::matmul(x, tape.param(*w_)), tape.param(*b_));
}

Mlp::Mlp(ParameterStore& store, const std::string& name, int in, int hidden, int out, Rng& rng, Init last)
    : first_(store, name + ".0", in, hidden, rng), last_(store, name + ".1", hidden, out, rng, last) {}

Var Mlp::operator()(Tape& tape, Var x) const { return last_(tape, ad::relu(first_(tape, x))); }

MultiHeadAttention::MultiHeadAttention(ParameterStore& store, const std::string& name, int dim, int heads,
                                       Rng& rng)
    : heads_(heads) {
  if (heads <= 0 || dim % heads != 0) throw ConfigError("model.heads", "must divide the feature width");
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  wq_ = &store.create(name + ".wq", uniform(dim, dim, bound, rng));
  wk_ = &store.create(name + ".wk", uniform(dim, dim, bound, rng));
  wv_ = &store.create(name + ".wv", uniform(dim, dim, bound, rng));
  wo_ = &store.create(name + ".wo", uniform(dim, dim, bound, rng));
}

Var MultiHeadAttention::operator()(Tape& tape, Var query, Var key, Var value, const ad::Mask& allowed) const {
  const Var q = ad::matmul(query, tape.param(*wq_));
  const Var k = ad::matmul(key, tape.param(*wk_));
  const Var v = ad::matmul(value, tape.param(*wv_));
  return ad::matmul(ad::attention(q, k, v, allowed, heads_), tape.param(*wo_));
}

}  // namespace distill::nn
