#include "fixtures.hpp"

#include "distill/error.hpp"
#include "distill/scene.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

namespace distill {
namespace {

namespace fs = std::filesystem;
constexpr double kPi = std::numbers::pi;

fs::path temp_file(const std::string& name) { return fs::path(::testing::TempDir()) / name; }

TEST(WrapAngle, RangeIsHalfOpen) {
  EXPECT_DOUBLE_EQ(wrap_angle(kPi), kPi);
  EXPECT_DOUBLE_EQ(wrap_angle(-kPi), kPi);
  EXPECT_NEAR(wrap_angle(3 * kPi / 2), -kPi / 2, 1e-12);
  EXPECT_NEAR(wrap_angle(0.25), 0.25, 1e-15);
}

TEST(GenerateScene, IsDeterministic) {
  GeneratorSpec spec;
  EXPECT_EQ(generate_scene(1, spec), generate_scene(1, spec));
  EXPECT_NE(generate_scene(1, spec), generate_scene(2, spec));
}

TEST(GenerateScene, PaddedShapes) {
  GeneratorSpec spec;
  spec.agent_count = 3;
  const Scene s = generate_scene(5, spec);
  ASSERT_EQ(s.agent_tracks.size(), static_cast<std::size_t>(kMaxAgents));
  ASSERT_EQ(s.map.size(), static_cast<std::size_t>(kMaxPolylines));
  ASSERT_EQ(s.agent_futures.size(), static_cast<std::size_t>(kMaxAgents));
  for (const AgentTrack& t : s.agent_tracks) EXPECT_EQ(t.states.size(), static_cast<std::size_t>(kTrackLength));
  for (const MapPolyline& p : s.map) EXPECT_EQ(p.points.size(), static_cast<std::size_t>(kPolylinePoints));
  for (std::size_t i = 3; i < s.agent_tracks.size(); ++i) EXPECT_FALSE(s.agent_tracks[i].valid());
  EXPECT_EQ(s.expert.future_traj.size(), static_cast<std::size_t>(kFutureSteps));
  EXPECT_EQ(s.expert.future_status.size(), static_cast<std::size_t>(kFutureSteps));
}

TEST(GenerateScene, EgoFrameAndMaskedStatesAreZero) {
  GeneratorSpec spec;
  spec.agent_count = 8;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Scene s = generate_scene(seed, spec);
    EXPECT_EQ(s.ego_track.current().position, Vec2::Zero());
    EXPECT_EQ(s.ego_track.current().yaw, 0.0);
    for (const AgentTrack& t : s.agent_tracks)
      for (const AgentState& st : t.states) {
        if (st.mask) {
          EXPECT_GT(st.dims.minCoeff(), 0.0);
          EXPECT_GT(st.yaw, -kPi);
          EXPECT_LE(st.yaw, kPi);
        } else {
          EXPECT_EQ(st, AgentState{});
        }
      }
  }
}

TEST(GenerateScene, ExpertIsKinematicallyConsistent) {
  GeneratorSpec spec;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const Scene s = generate_scene(seed, spec);
    const auto& hist = s.ego_track.states;
    for (std::size_t k = 1; k < hist.size(); ++k)
      EXPECT_LT((hist[k].position - hist[k - 1].position - hist[k].velocity * kFramePeriod).norm(), 1e-6);
    Vec2 prev = s.ego_track.current().position;
    for (int t = 0; t < kFutureSteps; ++t) {
      const Vec2& p = s.expert.future_traj[t];
      const EgoStatus& st = s.expert.future_status[t];
      const Vec2 vel(st[status::kVx], st[status::kVy]);
      EXPECT_LT((p - prev - vel * kFramePeriod).norm(), 1e-6) << "seed " << seed << " step " << t;
      EXPECT_NEAR(st[status::kSpeed], vel.norm(), 1e-6);
      EXPECT_EQ(st[status::kX], p.x());
      EXPECT_EQ(st[status::kY], p.y());
      prev = p;
    }
  }
}

TEST(GenerateScene, StraightEgoFollowsItsLaneCenter) {
  GeneratorSpec spec;
  spec.agent_count = 0;
  spec.turn_probability = 0.0;
  const Scene s = generate_scene(1, spec);
  // the ego's own lane center passes through the origin
  const MapPolyline* own = nullptr;
  for (const MapPolyline& p : s.map)
    if (p.valid && p.label == PolylineLabel::LaneCenter && std::abs(p.points[0].y()) < 1e-9) own = &p;
  ASSERT_NE(own, nullptr);
  for (const Vec2& p : s.expert.future_traj) EXPECT_NEAR(p.y(), 0.0, 1e-6);
  EXPECT_EQ(s.expert.command, Command::Straight);
}

TEST(GenerateScene, TurningSpecYieldsTurnCommands) {
  GeneratorSpec spec;
  spec.turn_probability = 1.0;
  int turns = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Scene s = generate_scene(seed, spec);
    EXPECT_EQ(s.expert.command, derive_command(s.expert.future_traj));
    turns += s.expert.command != Command::Straight;
  }
  EXPECT_GT(turns, 20);
  EXPECT_NE(generate_scene(2, spec).expert.command, Command::Straight);
}

TEST(GenerateScene, InvalidSpecNamesField) {
  GeneratorSpec spec;
  spec.max_speed = 25.0;
  try {
    generate_scene(0, spec);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "generator.max_speed");
  }
  spec = GeneratorSpec{};
  spec.lane_count = 0;
  EXPECT_THROW(generate_scene(0, spec), ConfigError);
  spec = GeneratorSpec{};
  spec.agent_count = -1;
  EXPECT_THROW(generate_scene(0, spec), ConfigError);
}

TEST(DeriveCommand, Examples) {
  std::vector<Vec2> straight;
  for (int i = 1; i <= 6; ++i) straight.emplace_back(i, 0.0);
  EXPECT_EQ(derive_command(straight), Command::Straight);

  std::vector<Vec2> quarter;  // radius 10, heading 0 -> pi/2
  for (int i = 0; i <= 6; ++i) {
    const double a = kPi / 2 * i / 6.0;
    quarter.emplace_back(10 * std::sin(a), 10 * (1 - std::cos(a)));
  }
  EXPECT_EQ(derive_command(quarter), Command::Left);
  for (Vec2& p : quarter) p.y() = -p.y();
  EXPECT_EQ(derive_command(quarter), Command::Right);

  std::vector<Vec2> gentle;  // net heading change -0.05
  for (int i = 0; i <= 6; ++i) {
    const double a = -0.05 * i / 6.0;
    gentle.emplace_back(100 * std::sin(-a), -100 * (1 - std::cos(a)));
  }
  EXPECT_EQ(derive_command(gentle), Command::Straight);
  EXPECT_THROW(derive_command({Vec2(1, 0)}), InputError);
}

AgentState state(Vec2 p, double yaw, Vec2 v = Vec2::Zero()) {
  AgentState s;
  s.position = p;
  s.yaw = yaw;
  s.velocity = v;
  s.dims = Vec2(4, 2);
  s.height = 1.5;
  s.mask = true;
  return s;
}

TEST(VectorizeTrack, Examples) {
  AgentTrack still;
  for (int i = 0; i < 3; ++i) still.states.push_back(state(Vec2(2, 3), 0.4));
  for (const AgentStateDelta& d : vectorize_track(still)) {
    EXPECT_EQ(d.dpos, Vec2::Zero());
    EXPECT_EQ(d.dyaw, 0.0);
    EXPECT_EQ(d.dims, Eigen::Vector3d(4, 2, 1.5));
    EXPECT_EQ(d.mask, 1.0);
  }

  AgentTrack moving;
  moving.states = {state(Vec2(0, 0), 0.0, Vec2(1, 0)), state(Vec2(1, 0), 0.0, Vec2(1, 0))};
  const auto d = vectorize_track(moving);
  EXPECT_EQ(d[0].dpos, Vec2::Zero());
  EXPECT_EQ(d[1].dpos, Vec2(1, 0));
  EXPECT_EQ(d[1].dyaw, 0.0);
  EXPECT_EQ(d[1].dvel, Vec2::Zero());
  EXPECT_EQ(d[1].as_array().size(), 9u);

  AgentTrack wrap;
  wrap.states = {state(Vec2::Zero(), 3.1), state(Vec2::Zero(), -3.1)};
  EXPECT_NEAR(vectorize_track(wrap)[1].dyaw, 2 * kPi - 6.2, 1e-12);
}

TEST(VectorizeTrack, MaskedFramesGiveZeroDeltas) {
  AgentTrack t;
  t.states = {AgentState{}, state(Vec2(5, 0), 0.0), state(Vec2(6, 0), 0.1)};
  const auto d = vectorize_track(t);
  EXPECT_EQ(d[0].mask, 0.0);
  EXPECT_EQ(d[0].dims, Eigen::Vector3d::Zero());
  EXPECT_EQ(d[1].dpos, Vec2::Zero());  // previous frame masked
  EXPECT_EQ(d[2].dpos, Vec2(1, 0));
}

TEST(MapFeatures, StraightPolyline) {
  MapPolyline p;
  for (int i = 0; i < kPolylinePoints; ++i) p.points.emplace_back(i, 0.0);
  const MapFeatureSet f = derive_map_features(p);
  ASSERT_EQ(f.vectors.size(), static_cast<std::size_t>(kPolylinePoints - 1));
  for (const Vec2& v : f.vectors) EXPECT_EQ(v, Vec2(1, 0));
  for (double h : f.headings) EXPECT_EQ(h, 0.0);
  EXPECT_EQ(f.center, p.points[kPolylinePoints / 2]);
  EXPECT_EQ(f.deviations[kPolylinePoints / 2], Vec2::Zero());
}

TEST(MapFeatures, LShapeHeadings) {
  MapPolyline p;
  for (int i = 0; i <= 5; ++i) p.points.emplace_back(i, 0.0);
  for (int i = 1; i <= 5; ++i) p.points.emplace_back(5.0, i);
  const MapFeatureSet f = derive_map_features(p);
  for (std::size_t i = 0; i < f.headings.size(); ++i) EXPECT_EQ(f.headings[i], i < 5 ? 0.0 : kPi / 2);
}

TEST(MapFeatures, DuplicatePointsAreDegenerate) {
  MapPolyline p;
  p.points = {Vec2(0, 0), Vec2(1, 0), Vec2(1, 0)};
  EXPECT_THROW(derive_map_features(p), DegenerateGeometryError);
  p.points = {Vec2(0, 0)};
  EXPECT_THROW(derive_map_features(p), InputError);
}

std::vector<std::vector<AgentBox>> one_agent(const AgentBox& b, int steps) {
  return {std::vector<AgentBox>(static_cast<std::size_t>(steps), b)};
}

TEST(Collision, Examples) {
  const std::vector<Vec2> traj(3, Vec2::Zero());
  const std::vector<double> yaws(3, 0.0);
  const Vec2 dims(4, 2);
  EXPECT_EQ(check_collision(traj, dims, yaws, one_agent({Vec2(100, 0), 0.0, dims, true}, 3)),
            std::vector<bool>(3, false));
  EXPECT_EQ(check_collision(traj, dims, yaws, one_agent({Vec2::Zero(), 0.0, dims, true}, 3)),
            std::vector<bool>(3, true));
  EXPECT_EQ(check_collision(traj, dims, yaws, one_agent({Vec2::Zero(), 0.0, dims, false}, 3)),
            std::vector<bool>(3, false));
  EXPECT_TRUE(boxes_overlap({Vec2(0, 0), 0.0, Vec2(2, 2)}, {Vec2(1.5, 0), 0.0, Vec2(2, 2)}));
  EXPECT_FALSE(boxes_overlap({Vec2(0, 0), 0.0, Vec2(2, 2)}, {Vec2(2.5, 0), 0.0, Vec2(2, 2)}));
  EXPECT_THROW(check_collision(traj, dims, yaws, one_agent({Vec2::Zero(), 0.0, dims, true}, 2)), InputError);
}

// Brute-force oracle: sample points of one box and test containment in the other.
bool contains(const OrientedBox& b, const Vec2& p) {
  const Vec2 d = p - b.center;
  const double lx = d.x() * std::cos(b.yaw) + d.y() * std::sin(b.yaw);
  const double ly = -d.x() * std::sin(b.yaw) + d.y() * std::cos(b.yaw);
  return std::abs(lx) <= b.dims.x() / 2 && std::abs(ly) <= b.dims.y() / 2;
}

TEST(Collision, SeparatingAxisMatchesSampling) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  int checked = 0;
  for (int trial = 0; trial < 400; ++trial) {
    const OrientedBox a{Vec2(u(rng) * 2.5, u(rng) * 2.5), u(rng) * kPi, Vec2(2 + u(rng), 1 + 0.5 * u(rng))};
    const OrientedBox b{Vec2(u(rng) * 2.5, u(rng) * 2.5), u(rng) * kPi, Vec2(2 + u(rng), 1 + 0.5 * u(rng))};
    bool sampled = false;
    for (int i = 0; i <= 40 && !sampled; ++i)
      for (int j = 0; j <= 40 && !sampled; ++j) {
        const double fx = -0.5 + i / 40.0, fy = -0.5 + j / 40.0;
        const Vec2 p = a.center + fx * a.dims.x() * Vec2(std::cos(a.yaw), std::sin(a.yaw)) +
                       fy * a.dims.y() * Vec2(-std::sin(a.yaw), std::cos(a.yaw));
        sampled = contains(b, p);
      }
    const bool sat = boxes_overlap(a, b);
    EXPECT_EQ(sat, boxes_overlap(b, a));
    if (sampled) EXPECT_TRUE(sat);  // sampling can only miss thin overlaps
    checked += sampled;
  }
  EXPECT_GT(checked, 50);
}

TEST(SceneFile, RoundTrip) {
  const auto scenes = testkit::make_scenes(20, 9, 6);
  const fs::path path = temp_file("scenes_roundtrip.jsonl");
  write_scenes(scenes, path);
  EXPECT_EQ(read_scenes(path), scenes);
}

TEST(SceneFile, EmptyListHasHeaderOnly) {
  const fs::path path = temp_file("scenes_empty.jsonl");
  write_scenes({}, path);
  std::ifstream in(path);
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 1);
  EXPECT_TRUE(read_scenes(path).empty());
}

TEST(SceneFile, VersionMismatchIsRejected) {
  const fs::path path = temp_file("scenes_v0.jsonl");
  std::ofstream(path) << R"({"format":"distill-scenes","version":0})" << '\n';
  try {
    read_scenes(path);
    FAIL();
  } catch (const FormatError& e) {
    EXPECT_EQ(e.expected(), "1");
    EXPECT_EQ(e.found(), "0");
  }
}

TEST(SceneFile, MalformedRecordReportsLine) {
  const auto scenes = testkit::make_scenes(2, 1);
  const fs::path path = temp_file("scenes_bad.jsonl");
  write_scenes(scenes, path);
  std::ofstream(path, std::ios::app) << "{not json\n";
  try {
    read_scenes(path);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
}

}  // namespace
}  // namespace distill
