#include "fixtures.hpp"

#include "distill/error.hpp"
#include "distill/vocabulary.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numeric>

namespace distill {
namespace {

Trajectory line(double dx, double dy) {
  Trajectory t;
  for (int i = 1; i <= kFutureSteps; ++i) t.emplace_back(dx * i, dy * i);
  return t;
}

Trajectory arc(double radius, double sweep) {
  Trajectory t;
  for (int i = 1; i <= kFutureSteps; ++i) {
    const double a = sweep * i / kFutureSteps;
    t.emplace_back(radius * std::sin(a), radius * (1 - std::cos(a)));
  }
  return t;
}

double sse(const std::vector<Trajectory>& trajs, const std::vector<int>& assign, const std::vector<Trajectory>& centers) {
  double s = 0.0;
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    const Trajectory dt = displacements(trajs[i]);
    const Trajectory dc = displacements(centers[assign[i]]);
    for (std::size_t k = 0; k < dt.size(); ++k) s += (dt[k] - dc[k]).squaredNorm();
    s += (trajs[i].back() - centers[assign[i]].back()).squaredNorm();
  }
  return s;
}

TEST(Vocabulary, IdenticalInputsCollapse) {
  const std::vector<Trajectory> trajs(5, line(2.0, 0.3));
  const PlanningVocabulary v = cluster_vocabulary(trajs, 5, 1);
  for (const Trajectory& m : v.modes)
    for (int i = 0; i < kFutureSteps; ++i) EXPECT_NEAR((m[i] - trajs[0][i]).norm(), 0.0, 1e-12);
}

TEST(Vocabulary, TwoGroupsMatchBruteForceTwoMeans) {
  std::vector<Trajectory> trajs;
  for (int i = 0; i < 4; ++i) trajs.push_back(line(3.0 + 0.1 * i, 0.0));
  for (int i = 0; i < 4; ++i) trajs.push_back(arc(12.0 + i, 1.2));
  const PlanningVocabulary v = cluster_vocabulary(trajs, 2, 7);

  // exhaustive search over all 2-partitions for the SSE-optimal split
  double best = std::numeric_limits<double>::infinity();
  std::vector<Trajectory> best_centers;
  for (int mask = 1; mask < (1 << 8) - 1; ++mask) {
    std::vector<Trajectory> centers(2, Trajectory(kFutureSteps, Vec2::Zero()));
    std::vector<int> assign(8), count(2, 0);
    for (int i = 0; i < 8; ++i) {
      assign[i] = (mask >> i) & 1;
      ++count[assign[i]];
      for (int k = 0; k < kFutureSteps; ++k) centers[assign[i]][k] += trajs[i][k];
    }
    for (int c = 0; c < 2; ++c)
      for (Vec2& p : centers[c]) p /= count[c];
    const double s = sse(trajs, assign, centers);
    if (s < best) {
      best = s;
      best_centers = centers;
    }
  }
  std::vector<int> a(8);
  for (int i = 0; i < 8; ++i) a[i] = nearest_mode(trajs[i], v);
  EXPECT_NEAR(sse(trajs, a, v.modes), best, 1e-9);
  for (const Trajectory& c : best_centers) {
    double closest = std::numeric_limits<double>::infinity();
    for (const Trajectory& m : v.modes) closest = std::min(closest, mean_point_distance(c, m));
    EXPECT_LT(closest, 1e-9);
  }
}

TEST(Vocabulary, DeterministicAndEndpointsConsistent) {
  const auto scenes = testkit::make_scenes(60, 2);
  const PlanningVocabulary a = testkit::make_vocab(scenes, 8, 3);
  const PlanningVocabulary b = testkit::make_vocab(scenes, 8, 3);
  EXPECT_EQ(a, b);
  for (int i = 0; i < a.size(); ++i) EXPECT_EQ(a.endpoints[i], a.modes[i].back());
}

TEST(Vocabulary, ObjectiveNeverIncreases) {
  const auto scenes = testkit::make_scenes(120, 5);
  std::vector<Trajectory> trajs;
  for (const Scene& s : scenes) trajs.push_back(s.expert.future_traj);
  KMeansTrace trace;
  cluster_vocabulary(trajs, 16, 11, &trace);
  ASSERT_FALSE(trace.objective.empty());
  EXPECT_LE(trace.iterations, 50);
  for (std::size_t i = 1; i < trace.objective.size(); ++i)
    EXPECT_LE(trace.objective[i], trace.objective[i - 1] * (1 + 1e-12));
}

TEST(Vocabulary, CoverageImprovesWithModeCount) {
  const auto scenes = testkit::make_scenes(200, 8);
  std::vector<Trajectory> trajs;
  for (const Scene& s : scenes) trajs.push_back(s.expert.future_traj);
  double prev = std::numeric_limits<double>::infinity();
  for (int n : {4, 8, 16, 32}) {
    const PlanningVocabulary v = cluster_vocabulary(trajs, n, 0);
    double total = 0.0;
    for (const Trajectory& t : trajs) total += mean_point_distance(t, v.modes[nearest_mode(t, v)]);
    EXPECT_LE(total, prev + 1e-9) << n;
    prev = total;
  }
}

TEST(Vocabulary, TooFewTrajectories) {
  EXPECT_THROW(cluster_vocabulary(std::vector<Trajectory>(3, line(1, 0)), 4, 0), InputError);
}

PlanningVocabulary fan(int n) {
  PlanningVocabulary v;
  for (int i = 0; i < n; ++i) {
    v.modes.push_back(line(3.0, 0.5 * (i - n / 2)));
    v.endpoints.push_back(v.modes.back().back());
  }
  return v;
}

TEST(SoftLabels, NearestGetsPointEight) {
  const PlanningVocabulary v = fan(8);
  const std::vector<double> p = soft_labels(v.modes[3], v, 2);
  EXPECT_DOUBLE_EQ(p[3], 0.8);
  EXPECT_DOUBLE_EQ(p[2], 0.1);
  EXPECT_DOUBLE_EQ(p[4], 0.1);
  EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-12);
  EXPECT_EQ(std::count_if(p.begin(), p.end(), [](double x) { return x > 0; }), 3);
}

TEST(SoftLabels, NoNeighborsIsOneHot) {
  const PlanningVocabulary v = fan(4);
  const std::vector<double> p = soft_labels(v.modes[1], v, 0);
  EXPECT_EQ(p, (std::vector<double>{0, 1, 0, 0}));
  EXPECT_THROW(soft_labels(v.modes[1], v, 4), InputError);
}

TEST(SoftLabels, TieGoesToLowerIndex) {
  const PlanningVocabulary v = fan(4);
  Trajectory mid;
  for (int i = 0; i < kFutureSteps; ++i) mid.push_back(0.5 * (v.modes[1][i] + v.modes[2][i]));
  const std::vector<double> p = soft_labels(mid, v, 1);
  EXPECT_DOUBLE_EQ(p[1], 0.8);
  EXPECT_DOUBLE_EQ(p[2], 0.2);
  EXPECT_EQ(nearest_mode(mid, v), 1);
}

TEST(NearestMode, MatchesBruteForce) {
  const auto scenes = testkit::make_scenes(80, 4);
  const PlanningVocabulary v = testkit::make_vocab(scenes, 32);
  EXPECT_EQ(nearest_mode(v.modes[0], v), 0);
  for (const Scene& s : testkit::make_scenes(50, 99)) {
    int best = 0;
    for (int i = 1; i < v.size(); ++i)
      if (mean_point_distance(s.expert.future_traj, v.modes[i]) <
          mean_point_distance(s.expert.future_traj, v.modes[best]))
        best = i;
    EXPECT_EQ(nearest_mode(s.expert.future_traj, v), best);
  }
}

TEST(VocabularyFile, RoundTripAndVersionCheck) {
  const PlanningVocabulary v = testkit::make_vocab(testkit::make_scenes(40, 6), 8);
  const auto path = std::filesystem::path(::testing::TempDir()) / "vocab.jsonl";
  write_vocabulary(v, path);
  EXPECT_EQ(read_vocabulary(path), v);
  std::ofstream(path) << R"({"format":"distill-vocab","version":2})" << '\n';
  EXPECT_THROW(read_vocabulary(path), FormatError);
}

}  // namespace
}  // namespace distill
