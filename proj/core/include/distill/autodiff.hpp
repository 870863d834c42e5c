#pragma once

// Tape-based reverse-mode automatic differentiation over dense row-major
// double matrices. Every forward pass records onto its own Tape; parameters
// live outside the tape and are bound to it through Tape::param.

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace distill::ad {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Mask = Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// A trainable weight. Owned by a ParameterStore; `frozen` parameters bind as
// constants so no gradient is ever produced for them.
struct Parameter {
  std::string name;
  Mat value;
  bool frozen = false;
};

class Tape;

// Lightweight handle to a tape node.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }
  bool requires_grad() const;

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  int id_ = -1;
};

using GradientMap = std::unordered_map<const Parameter*, Mat>;

class Tape {
 public:
  using Backward = std::function<void(Tape&, const Mat& out_grad, int self)>;

  Tape() { nodes_.reserve(1024); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Mat value);
  Var variable(Mat value);
  Var param(Parameter& p);

  // Adds a node computed from `parents`. The backward closure runs only when
  // at least one parent requires a gradient.
  Var record(Mat value, std::initializer_list<Var> parents, Backward backward);
  Var record(Mat value, std::span<const Var> parents, Backward backward);

  const Mat& value(int id) const { return nodes_[id].value; }
  const Mat& value(Var v) const { return nodes_[v.id()].value; }
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }
  bool requires_grad(int id) const { return nodes_[id].requires_grad; }

  // Gradient buffer, zero-initialized on first access.
  Mat& grad(int id);
  Mat& grad(Var v) { return grad(v.id()); }
  bool has_grad(Var v) const { return nodes_[v.id()].grad.size() != 0; }

  // Seeds d(loss)/d(loss) = 1 and propagates to every node.
  void backward(Var loss);

  // Adds parameter gradients from the last backward pass into `out`.
  void collect_gradients(GradientMap& out) const;
  GradientMap gradients() const;

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    Backward backward;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, int> bound_;
};

// ---- elementwise and linear algebra ----
Var matmul(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var cmul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var add_row(Var a, Var row);  // row is 1 x cols, broadcast over rows
Var broadcast_rows(Var row, Eigen::Index count);
Var transpose(Var a);

Var relu(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
Var exp(Var a);
Var log(Var a);
Var softplus(Var a);
Var abs(Var a);
Var square(Var a);

// ---- reductions ----
Var sum(Var a);
Var mean(Var a);
Var row_sum(Var a);    // n x 1
Var row_norms(Var a);  // n x 1, Euclidean; subgradient zero at the origin

// ---- structure ----
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var gather_rows(Var a, std::span<const int> rows);
Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);  // row-major order
Var element(Var a, Eigen::Index r, Eigen::Index c);
Var cumsum_rows(Var a);
Var detach(Var a);

// Max over consecutive groups of `group` rows, per column.
Var max_pool_rows(Var a, Eigen::Index group);

Var softmax_rows(Var a);
Var log_softmax_rows(Var a);

// Multi-head scaled dot-product attention. `allowed(i, j)` says whether query
// i may read key j. A query row with no allowed keys yields zeros.
Var attention(Var q, Var k, Var v, const Mask& allowed, int heads);

// 1-D convolution over `length`-long sequences stacked along rows:
// x is (n * length) x in_ch, weight is (kernel * in_ch) x out_ch, zero padding
// keeps the length. Sequences never read across their boundaries.
Var conv1d(Var x, Eigen::Index length, Var weight, Var bias, int kernel);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, double s) { return scale(a, s); }
inline Var operator*(double s, Var a) { return scale(a, s); }

}  // namespace distill::ad
