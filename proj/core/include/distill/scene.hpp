#pragma once

// Scene model: agent tracks, map polylines and the expert plan, all in the
// current-frame ego coordinate system (ego at the origin facing +x).

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace distill {

using Vec2 = Eigen::Vector2d;

inline constexpr double kFramePeriod = 0.5;  // 2 Hz
inline constexpr int kHistoryFrames = 4;     // past frames, current frame excluded
inline constexpr int kTrackLength = kHistoryFrames + 1;
inline constexpr int kFutureSteps = 6;  // 3 s
inline constexpr int kMaxAgents = 16;
inline constexpr int kMaxPolylines = 12;
inline constexpr int kPolylinePoints = 20;
inline constexpr int kStatusDim = 10;
inline constexpr int kDeltaDim = 9;
inline constexpr double kCommandThreshold = 0.1;  // rad

// Wraps into (-pi, pi].
double wrap_angle(double a);

struct AgentState {
  Vec2 position = Vec2::Zero();
  double yaw = 0.0;
  Vec2 velocity = Vec2::Zero();
  Vec2 dims = Vec2::Zero();  // length, width
  double height = 0.0;
  bool mask = false;

  bool operator==(const AgentState&) const = default;
};

struct AgentTrack {
  std::int64_t agent_id = -1;
  std::vector<AgentState> states;  // oldest first, current frame last

  bool valid() const { return !states.empty() && states.back().mask; }
  const AgentState& current() const { return states.back(); }
  bool operator==(const AgentTrack&) const = default;
};

// The 9-vector of inter-frame deltas fed to the agent encoder:
// [dx, dy, dyaw, dvx, dvy, length, width, height, mask].
struct AgentStateDelta {
  Vec2 dpos = Vec2::Zero();
  double dyaw = 0.0;
  Vec2 dvel = Vec2::Zero();
  Eigen::Vector3d dims = Eigen::Vector3d::Zero();
  double mask = 0.0;

  std::array<double, kDeltaDim> as_array() const {
    return {dpos.x(), dpos.y(), dyaw, dvel.x(), dvel.y(), dims.x(), dims.y(), dims.z(), mask};
  }
};

enum class PolylineLabel { LaneCenter = 0, LaneBoundary = 1, RoadEdge = 2 };
inline constexpr int kLabelCount = 3;

std::string_view to_string(PolylineLabel label);
PolylineLabel parse_label(std::string_view text);

struct MapPolyline {
  std::vector<Vec2> points;
  PolylineLabel label = PolylineLabel::LaneCenter;
  bool valid = false;  // padding entries are invalid

  bool operator==(const MapPolyline&) const = default;
};

struct MapFeatureSet {
  Vec2 center = Vec2::Zero();
  std::vector<Vec2> vectors;      // N_P - 1 segment vectors
  std::vector<double> headings;   // N_P - 1
  std::vector<Vec2> deviations;   // N_P, relative to center
  PolylineLabel label = PolylineLabel::LaneCenter;
};

// [x, y, yaw, vx, vy, ax, ay, yaw_rate, speed, curvature]
using EgoStatus = std::array<double, kStatusDim>;

namespace status {
inline constexpr int kX = 0, kY = 1, kYaw = 2, kVx = 3, kVy = 4, kAx = 5, kAy = 6, kYawRate = 7,
                     kSpeed = 8, kCurvature = 9;
}

enum class Command { Left = 0, Straight = 1, Right = 2 };
inline constexpr int kCommandCount = 3;

std::string_view to_string(Command c);
Command parse_command(std::string_view text);

struct ExpertPlan {
  std::vector<Vec2> future_traj;  // kFutureSteps positions
  std::vector<EgoStatus> future_status;
  Command command = Command::Straight;

  bool operator==(const ExpertPlan&) const = default;
};

struct AgentBox {
  Vec2 center = Vec2::Zero();
  double yaw = 0.0;
  Vec2 dims = Vec2::Zero();
  bool valid = false;

  bool operator==(const AgentBox&) const = default;
};

struct Scene {
  std::int64_t scene_id = 0;
  AgentTrack ego_track;
  std::vector<AgentTrack> agent_tracks;  // kMaxAgents, mask padded
  std::vector<MapPolyline> map;          // kMaxPolylines, padded
  ExpertPlan expert;
  std::vector<std::vector<AgentBox>> agent_futures;  // [agent][step]

  bool operator==(const Scene&) const = default;
};

struct GeneratorSpec {
  int agent_count = 6;
  int lane_count = 3;
  double min_speed = 3.0;
  double max_speed = 12.0;
  double max_accel = 1.0;
  double turn_probability = 0.4;
  double ego_length = 4.08;
  double ego_width = 1.73;

  void validate() const;
};

Scene generate_scene(std::uint64_t seed, const GeneratorSpec& spec);

// Left/right when the heading change between the first and last segment of
// the trajectory exceeds kCommandThreshold.
Command derive_command(const std::vector<Vec2>& future_traj);

std::vector<AgentStateDelta> vectorize_track(const AgentTrack& track);

MapFeatureSet derive_map_features(const MapPolyline& polyline);

struct OrientedBox {
  Vec2 center;
  double yaw;
  Vec2 dims;
};

bool boxes_overlap(const OrientedBox& a, const OrientedBox& b);

// Per-step overlap of the ego rectangle (following traj/yaw_seq) with any
// valid agent box at the same step.
std::vector<bool> check_collision(const std::vector<Vec2>& traj, const Vec2& ego_dims,
                                  const std::vector<double>& yaw_seq,
                                  const std::vector<std::vector<AgentBox>>& agent_futures);

// Headings implied by a trajectory that starts at the origin facing +x.
std::vector<double> trajectory_yaws(const std::vector<Vec2>& traj);

// Rounds to 9 significant digits, the precision of the scene file.
double quantize(double v);

// ---- scene file ----
void write_scenes(const std::vector<Scene>& scenes, const std::filesystem::path& path);
std::vector<Scene> read_scenes(const std::filesystem::path& path);

}  // namespace distill
