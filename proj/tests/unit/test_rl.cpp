#include "fixtures.hpp"
#include "toys.hpp"

#include "distill/error.hpp"
#include "distill/rl.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace distill {
namespace {

// Ego driving straight at 10 m/s with no agents around.
struct StraightCase {
  Scene scene;
  Trajectory plan;
  EgoStatus status{};
  Vec2 dims{4.08, 1.73};

  StraightCase() {
    for (int t = 1; t <= kFutureSteps; ++t) plan.emplace_back(5.0 * t, 0.0);
    status[status::kX] = 5.0;
    status[status::kVx] = 10.0;
    status[status::kSpeed] = 10.0;
    scene.expert.future_traj = plan;
    scene.expert.future_status.assign(kFutureSteps, status);
    for (auto& s : scene.expert.future_status) s[status::kX] = 0.0;
    scene.expert.future_status.front()[status::kX] = 5.0;
  }
};

const std::array<double, kRewardCount> kOnes{1, 1, 1, 1, 1, 1, 1};

TEST(Reward, PerfectPredictionGivesUnitFactors) {
  StraightCase c;
  const auto x = reward_components(c.plan, c.status, c.scene.expert, c.scene, c.dims);
  for (double v : x) EXPECT_EQ(v, 0.0);
  for (double v : x) EXPECT_EQ(std::exp(-v), 1.0);
  EXPECT_DOUBLE_EQ(aggregate_reward(x, kOnes), 7.0);
}

TEST(Reward, IllegalSpeedLowersReward) {
  StraightCase c;
  const double base = aggregate_reward(reward_components(c.plan, c.status, c.scene.expert, c.scene, c.dims), kOnes);
  EgoStatus fast = c.status;
  fast[status::kVx] = 25.0;
  const auto x = reward_components(c.plan, fast, c.scene.expert, c.scene, c.dims);
  EXPECT_EQ(x[static_cast<int>(RewardTerm::SpeedGate)], 1.0);
  EXPECT_LT(aggregate_reward(x, kOnes), base);
  EgoStatus stopped = c.status;
  stopped[status::kVx] = 0.0;
  EXPECT_EQ(reward_components(c.plan, stopped, c.scene.expert, c.scene, c.dims)[static_cast<int>(RewardTerm::SpeedGate)],
            1.0);
}

TEST(Reward, CollisionLowersReward) {
  StraightCase c;
  const double base = aggregate_reward(reward_components(c.plan, c.status, c.scene.expert, c.scene, c.dims), kOnes);
  std::vector<AgentBox> boxes(kFutureSteps);
  for (auto& b : boxes) b = AgentBox{Vec2(15.0, 0.0), 0.0, Vec2(4.0, 2.0), true};
  c.scene.agent_futures.push_back(boxes);
  const auto x = reward_components(c.plan, c.status, c.scene.expert, c.scene, c.dims);
  EXPECT_EQ(x[static_cast<int>(RewardTerm::Collision)], 1.0);
  EXPECT_LT(aggregate_reward(x, kOnes), base);
}

TEST(Reward, MaskedTermsAreDropped) {
  std::array<double, kRewardCount> x{};
  RewardMask mask{true, true, true, true, true, true, true};
  mask[2] = false;
  EXPECT_DOUBLE_EQ(aggregate_reward(x, kOnes, mask), 6.0);
  Tape t;
  Mat xm = Mat::Zero(1, kRewardCount), om = Mat::Ones(1, kRewardCount);
  EXPECT_DOUBLE_EQ(aggregate_reward(t.constant(xm), t.constant(om), mask).value()(0, 0), 6.0);
}

TEST(RewardWeights, StartAtOne) {
  nn::ParameterStore store;
  const RewardWeights w(store, "reward.omega");
  for (double v : w.values()) EXPECT_NEAR(v, 1.0, 1e-12);
  Tape t;
  EXPECT_TRUE(w(t).value().isApprox(Mat::Ones(1, kRewardCount), 1e-12));
}

TEST(QTarget, SpotCheck) {
  EXPECT_DOUBLE_EQ(q_target_value(1.0, 2.0, 0.95), 2.9);
}

TEST(QTarget, UsesTargetNetworkMax) {
  nn::ParameterStore store;
  nn::Rng rng(2);
  const QNetworks nets(store, "q", testkit::tiny_model(), 0.95, rng);
  const Mat s = testkit::random_mat(1, kStatusDim, 4);
  Tape t;
  const double max_q = nets.target(t, t.constant(s)).value().maxCoeff();
  const Var y = q_target_value(t.constant(Mat::Constant(1, 1, 1.0)), s, nets);
  EXPECT_DOUBLE_EQ(y.value()(0, 0), q_target_value(1.0, max_q, 0.95));
}

TEST(QNetworks, GammaOutOfRangeIsConfigError) {
  nn::ParameterStore store;
  nn::Rng rng(2);
  EXPECT_THROW(QNetworks(store, "q", testkit::tiny_model(), 1.0, rng), ConfigError);
}

TEST(LossRL, TermsAddUp) {
  nn::ParameterStore store;
  nn::Rng rng(2);
  const QNetworks nets(store, "q", testkit::tiny_model(), 0.95, rng);
  Tape t;
  const Mat expert = testkit::random_mat(1, kStatusDim, 5);
  const RLLoss l = loss_rl(t.constant(testkit::random_mat(1, kStatusDim, 6)), expert, Command::Left, nets,
                           t.constant(Mat::Constant(1, 1, 3.0)));
  EXPECT_DOUBLE_EQ(l.total.value()(0, 0), l.term_target.value()(0, 0) + l.term_main.value()(0, 0));
  const Mat qt = nets.target(t, t.constant(expert)).value();
  Eigen::Index best = 0;
  qt.row(0).maxCoeff(&best);
  EXPECT_EQ(l.action, best);
  EXPECT_NEAR(l.term_target.value()(0, 0), (qt - action_one_hot(Command::Left)).cwiseAbs().sum(), 1e-12);
}

TEST(QToy, ReachesFullAccuracy) {
  const testkit::QToyResult r = testkit::run_q_toy(200, 500, 11);
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_LE(r.steps, 500);
}

}  // namespace
}  // namespace distill
