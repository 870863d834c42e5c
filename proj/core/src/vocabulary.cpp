#include "distill/vocabulary.hpp"

#include "distill/error.hpp"
#include "distill/record_io.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <limits>
#include <numeric>
#include <random>

namespace distill {

namespace {

constexpr int kMaxIterations = 50;

Eigen::VectorXd featurize(const Trajectory& traj) {
  const Trajectory disp = displacements(traj);
  Eigen::VectorXd f(2 * disp.size() + 2);
  for (std::size_t t = 0; t < disp.size(); ++t) f.segment<2>(2 * static_cast<Eigen::Index>(t)) = disp[t];
  f.tail<2>() = traj.back();
  return f;
}

}  // namespace

Trajectory displacements(const Trajectory& traj) {
  Trajectory d;
  d.reserve(traj.size());
  Vec2 prev = Vec2::Zero();
  for (const Vec2& p : traj) {
    d.push_back(p - prev);
    prev = p;
  }
  return d;
}

Trajectory positions_from_displacements(const Trajectory& disp) {
  Trajectory p;
  p.reserve(disp.size());
  Vec2 acc = Vec2::Zero();
  for (const Vec2& d : disp) {
    acc += d;
    p.push_back(acc);
  }
  return p;
}

PlanningVocabulary cluster_vocabulary(const std::vector<Trajectory>& trajs, int mode_count, std::uint64_t seed,
                                      KMeansTrace* trace) {
  if (mode_count < 1) throw InputError("mode count must be positive");
  if (static_cast<int>(trajs.size()) < mode_count)
    throw InputError("need at least " + std::to_string(mode_count) + " trajectories, got " +
                     std::to_string(trajs.size()));
  const std::size_t horizon = trajs.front().size();
  for (const auto& t : trajs)
    if (t.size() != horizon || horizon == 0) throw InputError("trajectories must share a non-zero horizon");

  const int n = static_cast<int>(trajs.size());
  std::vector<Eigen::VectorXd> x;
  x.reserve(trajs.size());
  for (const auto& t : trajs) x.push_back(featurize(t));

  // k-means++ seeding
  std::mt19937_64 rng(seed);
  std::vector<Eigen::VectorXd> centers;
  centers.push_back(x[std::uniform_int_distribution<int>(0, n - 1)(rng)]);
  std::vector<double> d2(static_cast<std::size_t>(n));
  while (static_cast<int>(centers.size()) < mode_count) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& c : centers) best = std::min(best, (x[i] - c).squaredNorm());
      d2[i] = best;
      total += best;
    }
    int pick = 0;
    if (total <= 0.0) {
      pick = std::uniform_int_distribution<int>(0, n - 1)(rng);
    } else {
      double r = std::uniform_real_distribution<double>(0.0, total)(rng);
      for (pick = 0; pick < n - 1; ++pick) {
        r -= d2[pick];
        if (r < 0.0) break;
      }
    }
    centers.push_back(x[pick]);
  }

  std::vector<int> assign(static_cast<std::size_t>(n), -1);
  int iter = 0;
  for (; iter < kMaxIterations; ++iter) {
    bool changed = false;
    double sse = 0.0;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double best_d = (x[i] - centers[0]).squaredNorm();
      for (int k = 1; k < mode_count; ++k) {
        const double d = (x[i] - centers[k]).squaredNorm();
        if (d < best_d) {
          best_d = d;
          best = k;
        }
      }
      changed = changed || assign[i] != best;
      assign[i] = best;
      sse += best_d;
    }
    if (trace) trace->objective.push_back(sse);
    if (!changed) break;
    for (int k = 0; k < mode_count; ++k) {
      Eigen::VectorXd acc = Eigen::VectorXd::Zero(x[0].size());
      int count = 0;
      for (int i = 0; i < n; ++i)
        if (assign[i] == k) {
          acc += x[i];
          ++count;
        }
      if (count > 0) centers[k] = acc / count;
    }
  }
  if (trace) trace->iterations = iter;

  PlanningVocabulary vocab;
  for (const auto& c : centers) {
    Trajectory disp;
    for (std::size_t t = 0; t < horizon; ++t) disp.push_back(c.segment<2>(2 * static_cast<Eigen::Index>(t)));
    vocab.modes.push_back(positions_from_displacements(disp));
    vocab.endpoints.push_back(vocab.modes.back().back());
  }
  return vocab;
}

double mean_point_distance(const Trajectory& a, const Trajectory& b) {
  double acc = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) acc += (a[t] - b[t]).norm();
  return acc / static_cast<double>(a.size());
}

int nearest_mode(const Trajectory& expert, const PlanningVocabulary& vocab) {
  int best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (int i = 0; i < vocab.size(); ++i) {
    const double d = mean_point_distance(expert, vocab.modes[i]);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::vector<double> soft_labels(const Trajectory& expert, const PlanningVocabulary& vocab, int neighbors) {
  const int n = vocab.size();
  if (neighbors < 0 || neighbors >= n)
    throw InputError("soft label neighbor count must lie in [0, " + std::to_string(n - 1) + "]");
  std::vector<double> dist(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) dist[i] = mean_point_distance(expert, vocab.modes[i]);
  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return dist[a] < dist[b]; });

  std::vector<double> probs(static_cast<std::size_t>(n), 0.0);
  if (neighbors == 0) {
    probs[order[0]] = 1.0;
    return probs;
  }
  probs[order[0]] = kSoftLabelTop;
  for (int k = 1; k <= neighbors; ++k) probs[order[k]] = (1.0 - kSoftLabelTop) / neighbors;
  return probs;
}

void write_vocabulary(const PlanningVocabulary& vocab, const std::filesystem::path& path) {
  io::RecordWriter w(path, "distill-vocab", 1);
  for (const auto& mode : vocab.modes) {
    io::json pts = io::json::array();
    for (const auto& p : mode) pts.push_back({p.x(), p.y()});
    w.write({{"mode", pts}});
  }
}

PlanningVocabulary read_vocabulary(const std::filesystem::path& path) {
  PlanningVocabulary vocab;
  io::read_records(path, "distill-vocab", 1, [&](const io::json& rec, std::size_t) {
    Trajectory mode;
    for (const auto& p : rec.at("mode")) {
      if (p.size() != 2) throw InputError("mode points must be 2-vectors");
      mode.emplace_back(p[0].get<double>(), p[1].get<double>());
    }
    if (mode.empty()) throw InputError("empty mode");
    vocab.endpoints.push_back(mode.back());
    vocab.modes.push_back(std::move(mode));
  });
  return vocab;
}

}  // namespace distill
