#include "distill/autodiff.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

namespace distill::ad {

const Mat& Var::value() const { return tape_->value(id_); }
bool Var::requires_grad() const { return tape_->requires_grad(id_); }

Var Tape::constant(Mat value) {
  nodes_.push_back(Node{std::move(value), Mat{}, nullptr, false});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::variable(Mat value) {
  nodes_.push_back(Node{std::move(value), Mat{}, nullptr, true});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::param(Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return Var(this, it->second);
  Var v = p.frozen ? constant(p.value) : variable(p.value);
  bound_.emplace(&p, v.id());
  return v;
}

Var Tape::record(Mat value, std::initializer_list<Var> parents, Backward backward) {
  return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                std::move(backward));
}

Var Tape::record(Mat value, std::span<const Var> parents, Backward backward) {
  bool needs = false;
  for (const Var& p : parents) needs = needs || nodes_[p.id()].requires_grad;
  nodes_.push_back(Node{std::move(value), Mat{}, needs ? std::move(backward) : nullptr, needs});
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Mat& Tape::grad(int id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss) {
  assert(loss.tape() == this);
  grad(loss.id()).setOnes();
  for (int i = loss.id(); i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.backward || n.grad.size() == 0) continue;
    n.backward(*this, n.grad, i);
  }
}

void Tape::collect_gradients(GradientMap& out) const {
  for (const auto& [p, id] : bound_) {
    const Node& n = nodes_[id];
    if (!n.requires_grad || n.grad.size() == 0) continue;
    auto [it, inserted] = out.try_emplace(p, n.grad);
    if (!inserted) it->second += n.grad;
  }
}

GradientMap Tape::gradients() const {
  GradientMap g;
  collect_gradients(g);
  return g;
}

namespace {

Tape& tape_of(Var a) { return *a.tape(); }

template <typename F, typename D>
Var unary(Var a, F forward, D derivative) {
  Tape& t = tape_of(a);
  Mat out = t.value(a).unaryExpr(forward);
  return t.record(std::move(out), {a}, [a, derivative](Tape& t, const Mat& g, int self) {
    const Mat& x = t.value(a);
    const Mat& y = t.value(self);
    Mat& ga = t.grad(a);
    for (Eigen::Index i = 0; i < x.size(); ++i)
      ga.data()[i] += g.data()[i] * derivative(x.data()[i], y.data()[i]);
  });
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a);
  Mat out = t.value(a) * t.value(b);
  return t.record(std::move(out), {a, b}, [a, b](Tape& t, const Mat& g, int) {
    if (t.requires_grad(a)) t.grad(a).noalias() += g * t.value(b).transpose();
    if (t.requires_grad(b)) t.grad(b).noalias() += t.value(a).transpose() * g;
  });
}

Var add(Var a, Var b) {
  Tape& t = tape_of(a);
  assert(a.rows() == b.rows() && a.cols() == b.cols());
  Mat out = t.value(a) + t.value(b);
  return t.record(std::move(out), {a, b}, [a, b](Tape& t, const Mat& g, int) {
    if (t.requires_grad(a)) t.grad(a) += g;
    if (t.requires_grad(b)) t.grad(b) += g;
  });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a);
  assert(a.rows() == b.rows() && a.cols() == b.cols());
  Mat out = t.value(a) - t.value(b);
  return t.record(std::move(out), {a, b}, [a, b](Tape& t, const Mat& g, int) {
    if (t.requires_grad(a)) t.grad(a) += g;
    if (t.requires_grad(b)) t.grad(b) -= g;
  });
}

Var cmul(Var a, Var b) {
  Tape& t = tape_of(a);
  Mat out = t.value(a).cwiseProduct(t.value(b));
  return t.record(std::move(out), {a, b}, [a, b](Tape& t, const Mat& g, int) {
    if (t.requires_grad(a)) t.grad(a) += g.cwiseProduct(t.value(b));
    if (t.requires_grad(b)) t.grad(b) += g.cwiseProduct(t.value(a));
  });
}

Var scale(Var a, double s) {
  Tape& t = tape_of(a);
  Mat out = t.value(a) * s;
  return t.record(std::move(out), {a}, [a, s](Tape& t, const Mat& g, int) { t.grad(a) += g * s; });
}

Var add_scalar(Var a, double s) {
  Tape& t = tape_of(a);
  Mat out = t.value(a).array() + s;
  return t.record(std::move(out), {a}, [a](Tape& t, const Mat& g, int) { t.grad(a) += g; });
}

Var add_row(Var a, Var row) {
  Tape& t = tape_of(a);
  assert(row.rows() == 1 && row.cols() == a.cols());
  Mat out = t.value(a).rowwise() + t.value(row).row(0);
  return t.record(std::move(out), {a, row}, [a, row](Tape& t, const Mat& g, int) {
    if (t.requires_grad(a)) t.grad(a) += g;
    if (t.requires_grad(row)) t.grad(row) += g.colwise().sum();
  });
}

Var broadcast_rows(Var row, Eigen::Index count) {
  Tape& t = tape_of(row);
  assert(row.rows() == 1);
  Mat out = t.value(row).replicate(count, 1);
  return t.record(std::move(out), {row},
                  [row](Tape& t, const Mat& g, int) { t.grad(row) += g.colwise().sum(); });
}

Var transpose(Var a) {
  Tape& t = tape_of(a);
  Mat out = t.value(a).transpose();
  return t.record(std::move(out), {a},
                  [a](Tape& t, const Mat& g, int) { t.grad(a) += g.transpose(); });
}

Var relu(Var a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var exp(Var a) {
  return unary(
      a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var softplus(Var a) {
  return unary(
      a, [](double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); },
      [](double x, double) { return 1.0 / (1.0 + std::exp(-x)); });
}

Var abs(Var a) {
  return unary(
      a, [](double x) { return std::abs(x); },
      [](double x, double) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

Var square(Var a) {
  return unary(
      a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var sum(Var a) {
  Tape& t = tape_of(a);
  Mat out(1, 1);
  out(0, 0) = t.value(a).sum();
  return t.record(std::move(out), {a},
                  [a](Tape& t, const Mat& g, int) { t.grad(a).array() += g(0, 0); });
}

Var mean(Var a) {
  Tape& t = tape_of(a);
  const double n = static_cast<double>(t.value(a).size());
  Mat out(1, 1);
  out(0, 0) = t.value(a).sum() / n;
  return t.record(std::move(out), {a},
                  [a, n](Tape& t, const Mat& g, int) { t.grad(a).array() += g(0, 0) / n; });
}

Var row_sum(Var a) {
  Tape& t = tape_of(a);
  Mat out = t.value(a).rowwise().sum();
  return t.record(std::move(out), {a}, [a](Tape& t, const Mat& g, int) {
    Mat& ga = t.grad(a);
    ga.colwise() += g.col(0);
  });
}

Var row_norms(Var a) {
  Tape& t = tape_of(a);
  Mat out = t.value(a).rowwise().norm();
  return t.record(std::move(out), {a}, [a](Tape& t, const Mat& g, int self) {
    const Mat& x = t.value(a);
    const Mat& n = t.value(self);
    Mat& ga = t.grad(a);
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      if (n(r, 0) > 0.0) ga.row(r) += (g(r, 0) / n(r, 0)) * x.row(r);
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  assert(!parts.empty());
  Tape& t = tape_of(parts[0]);
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts[0].cols();
  for (const Var& p : parts) {
    assert(p.cols() == cols);
    rows += p.rows();
  }
  Mat out(rows, cols);
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = t.value(p);
    r += p.rows();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return t.record(std::move(out), parts, [ps](Tape& t, const Mat& g, int) {
    Eigen::Index r = 0;
    for (const Var& p : ps) {
      const Eigen::Index n = t.value(p).rows();
      if (t.requires_grad(p)) t.grad(p) += g.middleRows(r, n);
      r += n;
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  assert(!parts.empty());
  Tape& t = tape_of(parts[0]);
  Eigen::Index cols = 0;
  const Eigen::Index rows = parts[0].rows();
  for (const Var& p : parts) {
    assert(p.rows() == rows);
    cols += p.cols();
  }
  Mat out(rows, cols);
  Eigen::Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = t.value(p);
    c += p.cols();
  }
  std::vector<Var> ps(parts.begin(), parts.end());
  return t.record(std::move(out), parts, [ps](Tape& t, const Mat& g, int) {
    Eigen::Index c = 0;
    for (const Var& p : ps) {
      const Eigen::Index n = t.value(p).cols();
      if (t.requires_grad(p)) t.grad(p) += g.middleCols(c, n);
      c += n;
    }
  });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  Tape& t = tape_of(a);
  assert(start >= 0 && start + count <= a.rows());
  Mat out = t.value(a).middleRows(start, count);
  return t.record(std::move(out), {a}, [a, start, count](Tape& t, const Mat& g, int) {
    t.grad(a).middleRows(start, count) += g;
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  Tape& t = tape_of(a);
  assert(start >= 0 && start + count <= a.cols());
  Mat out = t.value(a).middleCols(start, count);
  return t.record(std::move(out), {a}, [a, start, count](Tape& t, const Mat& g, int) {
    t.grad(a).middleCols(start, count) += g;
  });
}

Var gather_rows(Var a, std::span<const int> rows) {
  Tape& t = tape_of(a);
  const Mat& x = t.value(a);
  Mat out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
  std::vector<int> idx(rows.begin(), rows.end());
  return t.record(std::move(out), {a}, [a, idx](Tape& t, const Mat& g, int) {
    Mat& ga = t.grad(a);
    for (std::size_t i = 0; i < idx.size(); ++i) ga.row(idx[i]) += g.row(static_cast<Eigen::Index>(i));
  });
}

Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  Tape& t = tape_of(a);
  const Mat& x = t.value(a);
  assert(rows * cols == x.size());
  Mat out = Eigen::Map<const Mat>(x.data(), rows, cols);
  const Eigen::Index r0 = x.rows();
  const Eigen::Index c0 = x.cols();
  return t.record(std::move(out), {a}, [a, r0, c0](Tape& t, const Mat& g, int) {
    t.grad(a) += Eigen::Map<const Mat>(g.data(), r0, c0);
  });
}

Var element(Var a, Eigen::Index r, Eigen::Index c) {
  Tape& t = tape_of(a);
  Mat out(1, 1);
  out(0, 0) = t.value(a)(r, c);
  return t.record(std::move(out), {a},
                  [a, r, c](Tape& t, const Mat& g, int) { t.grad(a)(r, c) += g(0, 0); });
}

Var cumsum_rows(Var a) {
  Tape& t = tape_of(a);
  Mat out = t.value(a);
  for (Eigen::Index r = 1; r < out.rows(); ++r) out.row(r) += out.row(r - 1);
  return t.record(std::move(out), {a}, [a](Tape& t, const Mat& g, int) {
    // d/dx_r = sum_{s >= r} g_s
    Mat acc = g;
    for (Eigen::Index r = acc.rows() - 2; r >= 0; --r) acc.row(r) += acc.row(r + 1);
    t.grad(a) += acc;
  });
}

Var detach(Var a) { return tape_of(a).constant(a.value()); }

Var max_pool_rows(Var a, Eigen::Index group) {
  Tape& t = tape_of(a);
  const Mat& x = t.value(a);
  assert(group > 0 && x.rows() % group == 0);
  const Eigen::Index n = x.rows() / group;
  Mat out(n, x.cols());
  Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> arg(n, x.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      Eigen::Index best = i * group;
      for (Eigen::Index r = i * group + 1; r < (i + 1) * group; ++r)
        if (x(r, c) > x(best, c)) best = r;
      out(i, c) = x(best, c);
      arg(i, c) = static_cast<int>(best);
    }
  }
  return t.record(std::move(out), {a}, [a, arg](Tape& t, const Mat& g, int) {
    Mat& ga = t.grad(a);
    for (Eigen::Index i = 0; i < g.rows(); ++i)
      for (Eigen::Index c = 0; c < g.cols(); ++c) ga(arg(i, c), c) += g(i, c);
  });
}

Var softmax_rows(Var a) {
  Tape& t = tape_of(a);
  Mat out = t.value(a);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double m = out.row(r).maxCoeff();
    out.row(r) = (out.row(r).array() - m).exp();
    out.row(r) /= out.row(r).sum();
  }
  return t.record(std::move(out), {a}, [a](Tape& t, const Mat& g, int self) {
    const Mat& p = t.value(self);
    Mat& ga = t.grad(a);
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
      const double dot = g.row(r).dot(p.row(r));
      ga.row(r).array() += p.row(r).array() * (g.row(r).array() - dot);
    }
  });
}

Var log_softmax_rows(Var a) {
  Tape& t = tape_of(a);
  Mat out = t.value(a);
  for (Eigen::Index r = 0; r < out.rows(); ++r) {
    const double m = out.row(r).maxCoeff();
    const double lse = m + std::log((out.row(r).array() - m).exp().sum());
    out.row(r).array() -= lse;
  }
  return t.record(std::move(out), {a}, [a](Tape& t, const Mat& g, int self) {
    const Mat& y = t.value(self);
    Mat& ga = t.grad(a);
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      const double gs = g.row(r).sum();
      ga.row(r).array() += g.row(r).array() - y.row(r).array().exp() * gs;
    }
  });
}

Var attention(Var q, Var k, Var v, const Mask& allowed, int heads) {
  Tape& t = tape_of(q);
  const Mat& Q = t.value(q);
  const Mat& K = t.value(k);
  const Mat& V = t.value(v);
  const Eigen::Index nq = Q.rows();
  const Eigen::Index nk = K.rows();
  const Eigen::Index d = Q.cols();
  assert(K.cols() == d && V.rows() == nk && d % heads == 0);
  assert(allowed.rows() == nq && allowed.cols() == nk);
  const Eigen::Index dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  Mat out = Mat::Zero(nq, V.cols());
  const Eigen::Index dv = V.cols() / heads;
  std::vector<Mat> probs(static_cast<std::size_t>(heads));
  for (int h = 0; h < heads; ++h) {
    Mat s = (Q.middleCols(h * dh, dh) * K.middleCols(h * dh, dh).transpose()) * inv_sqrt;
    Mat& p = probs[static_cast<std::size_t>(h)];
    p = Mat::Zero(nq, nk);
    for (Eigen::Index i = 0; i < nq; ++i) {
      double m = -std::numeric_limits<double>::infinity();
      for (Eigen::Index j = 0; j < nk; ++j)
        if (allowed(i, j)) m = std::max(m, s(i, j));
      if (!std::isfinite(m)) continue;
      double z = 0.0;
      for (Eigen::Index j = 0; j < nk; ++j) {
        if (!allowed(i, j)) continue;
        p(i, j) = std::exp(s(i, j) - m);
        z += p(i, j);
      }
      p.row(i) /= z;
    }
    out.middleCols(h * dv, dv).noalias() = p * V.middleCols(h * dv, dv);
  }

  return t.record(std::move(out), {q, k, v},
                  [q, k, v, probs = std::move(probs), heads, dh, dv, inv_sqrt](Tape& t, const Mat& g, int) {
                    const Mat& Q = t.value(q);
                    const Mat& K = t.value(k);
                    const Mat& V = t.value(v);
                    const bool gq = t.requires_grad(q);
                    const bool gk = t.requires_grad(k);
                    const bool gv = t.requires_grad(v);
                    for (int h = 0; h < heads; ++h) {
                      const Mat& p = probs[static_cast<std::size_t>(h)];
                      const auto go = g.middleCols(h * dv, dv);
                      if (gv) t.grad(v).middleCols(h * dv, dv).noalias() += p.transpose() * go;
                      if (!gq && !gk) continue;
                      Mat dp = go * V.middleCols(h * dv, dv).transpose();
                      Mat ds(p.rows(), p.cols());
                      for (Eigen::Index i = 0; i < p.rows(); ++i) {
                        const double dot = dp.row(i).dot(p.row(i));
                        ds.row(i) = p.row(i).array() * (dp.row(i).array() - dot);
                      }
                      ds *= inv_sqrt;
                      if (gq) t.grad(q).middleCols(h * dh, dh).noalias() += ds * K.middleCols(h * dh, dh);
                      if (gk)
                        t.grad(k).middleCols(h * dh, dh).noalias() += ds.transpose() * Q.middleCols(h * dh, dh);
                    }
                  });
}

namespace {

Mat im2col(const Mat& x, Eigen::Index length, int kernel) {
  const Eigen::Index cin = x.cols();
  const Eigen::Index n = x.rows() / length;
  const int half = kernel / 2;
  Mat col = Mat::Zero(x.rows(), kernel * cin);
  for (Eigen::Index s = 0; s < n; ++s) {
    for (Eigen::Index p = 0; p < length; ++p) {
      for (int kk = 0; kk < kernel; ++kk) {
        const Eigen::Index src = p + kk - half;
        if (src < 0 || src >= length) continue;
        col.block(s * length + p, kk * cin, 1, cin) = x.row(s * length + src);
      }
    }
  }
  return col;
}

}  // namespace

Var conv1d(Var x, Eigen::Index length, Var weight, Var bias, int kernel) {
  Tape& t = tape_of(x);
  const Mat& X = t.value(x);
  assert(X.rows() % length == 0);
  assert(t.value(weight).rows() == kernel * X.cols());
  Mat col = im2col(X, length, kernel);
  Mat out = col * t.value(weight);
  out.rowwise() += t.value(bias).row(0);
  return t.record(std::move(out), {x, weight, bias},
                  [x, weight, bias, length, kernel, col = std::move(col)](Tape& t, const Mat& g, int) {
                    if (t.requires_grad(weight)) t.grad(weight).noalias() += col.transpose() * g;
                    if (t.requires_grad(bias)) t.grad(bias) += g.colwise().sum();
                    if (!t.requires_grad(x)) return;
                    const Mat dcol = g * t.value(weight).transpose();
                    Mat& gx = t.grad(x);
                    const Eigen::Index cin = gx.cols();
                    const Eigen::Index n = gx.rows() / length;
                    const int half = kernel / 2;
                    for (Eigen::Index s = 0; s < n; ++s)
                      for (Eigen::Index p = 0; p < length; ++p)
                        for (int kk = 0; kk < kernel; ++kk) {
                          const Eigen::Index src = p + kk - half;
                          if (src < 0 || src >= length) continue;
                          gx.row(s * length + src) += dcol.block(s * length + p, kk * cin, 1, cin);
                        }
                  });
}

}  // namespace distill::ad
