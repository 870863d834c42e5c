#include "distill/hungarian.hpp"

#include "distill/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace distill {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Shortest augmenting path Hungarian method (potentials), O(n^2 m).
// Forbidden entries are +inf. Returns the optimal value or +inf if infeasible.
double solve(const Eigen::MatrixXd& a, std::vector<int>* assignment) {
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(a.cols());
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), kInf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = kInf;
      int j1 = -1;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double c = a(i0 - 1, j - 1);
        const double cur = std::isinf(c) ? kInf : c - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      if (j1 < 0 || std::isinf(delta)) return kInf;
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> rows(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= m; ++j)
    if (p[j] != 0) rows[p[j] - 1] = j - 1;
  double total = 0.0;
  for (int i = 0; i < n; ++i) total += a(i, rows[i]);
  if (assignment) *assignment = std::move(rows);
  return total;
}

}  // namespace

Assignment hungarian_match(const Eigen::MatrixXd& cost) {
  const Eigen::Index n = cost.rows();
  const Eigen::Index m = cost.cols();
  if (n > m) throw InputError("assignment needs rows <= cols, got " + std::to_string(n) + "x" + std::to_string(m));
  if (!cost.allFinite()) throw InputError("assignment cost matrix has non-finite entries");
  Assignment out;
  if (n == 0) return out;

  std::vector<int> rows;
  const double best = solve(cost, &rows);
  const double tol = 1e-12 * std::max(1.0, cost.cwiseAbs().maxCoeff()) * static_cast<double>(n);

  // Fix rows in order to the smallest column that keeps the optimum reachable.
  Eigen::MatrixXd work = cost;
  for (Eigen::Index i = 0; i < n; ++i) {
    int chosen = rows[i];
    for (Eigen::Index j = 0; j < rows[i]; ++j) {
      if (std::isinf(work(i, j))) continue;
      Eigen::MatrixXd trial = work;
      for (Eigen::Index c = 0; c < m; ++c)
        if (c != j) trial(i, c) = kInf;
      for (Eigen::Index r = 0; r < n; ++r)
        if (r != i) trial(r, j) = kInf;
      std::vector<int> trial_rows;
      if (solve(trial, &trial_rows) <= best + tol) {
        chosen = static_cast<int>(j);
        rows = std::move(trial_rows);
        break;
      }
    }
    for (Eigen::Index c = 0; c < m; ++c)
      if (c != chosen) work(i, c) = kInf;
    for (Eigen::Index r = 0; r < n; ++r)
      if (r != i) work(r, chosen) = kInf;
  }
  out.row_to_col = rows;
  for (Eigen::Index i = 0; i < n; ++i) out.cost += cost(i, rows[i]);
  return out;
}

}  // namespace distill
