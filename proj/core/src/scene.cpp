#include "distill/scene.hpp"

#include "distill/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <random>

namespace distill {

namespace {

constexpr double kLaneWidth = 3.5;
constexpr double kPolylineStart = -15.0;
constexpr double kPolylineEnd = 60.0;
constexpr double kPi = std::numbers::pi;

Vec2 rotate(const Vec2& v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x() - s * v.y(), s * v.x() + c * v.y()};
}

// Reference path: straight, then a constant-curvature arc, then straight.
struct ReferencePath {
  double turn_start = 0.0;
  double curvature = 0.0;  // signed, positive turns left
  double arc_length = 0.0;

  struct Pose {
    Vec2 point;
    double heading;
  };

  Pose pose(double s) const {
    if (curvature == 0.0 || s <= turn_start) return {{s, 0.0}, 0.0};
    const double along = std::min(s - turn_start, arc_length);
    const double phi = curvature * along;
    Vec2 p{turn_start + std::sin(phi) / curvature, (1.0 - std::cos(phi)) / curvature};
    if (s - turn_start > arc_length) {
      const double rest = s - turn_start - arc_length;
      p += rest * Vec2{std::cos(phi), std::sin(phi)};
    }
    return {p, phi};
  }

  double curvature_at(double s) const {
    if (curvature == 0.0 || s <= turn_start || s > turn_start + arc_length) return 0.0;
    return curvature;
  }

  // Point at arc length s shifted `lateral` meters to the left.
  Pose offset(double s, double lateral) const {
    Pose p = pose(s);
    p.point += lateral * Vec2{-std::sin(p.heading), std::cos(p.heading)};
    return p;
  }
};

struct EgoFrame {
  Vec2 origin;
  double heading;

  Vec2 point(const Vec2& p) const { return rotate(p - origin, -heading); }
  Vec2 vector(const Vec2& v) const { return rotate(v, -heading); }
  double yaw(double h) const { return wrap_angle(h - heading); }
};

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

void quantize_vec(Vec2& v) {
  v.x() = quantize(v.x());
  v.y() = quantize(v.y());
}

void quantize_scene(Scene& scene) {
  auto q_state = [](AgentState& s) {
    quantize_vec(s.position);
    quantize_vec(s.velocity);
    quantize_vec(s.dims);
    s.yaw = quantize(s.yaw);
    s.height = quantize(s.height);
  };
  for (auto& s : scene.ego_track.states) q_state(s);
  for (auto& tr : scene.agent_tracks)
    for (auto& s : tr.states) q_state(s);
  for (auto& pl : scene.map)
    for (auto& p : pl.points) quantize_vec(p);
  for (auto& p : scene.expert.future_traj) quantize_vec(p);
  for (auto& st : scene.expert.future_status)
    for (double& v : st) v = quantize(v);
  for (auto& boxes : scene.agent_futures)
    for (auto& b : boxes) {
      quantize_vec(b.center);
      quantize_vec(b.dims);
      b.yaw = quantize(b.yaw);
    }
}

}  // namespace

double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);  // [-pi, pi]
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

double quantize(double v) {
  if (!std::isfinite(v) || v == 0.0) return v == 0.0 ? 0.0 : v;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return std::strtod(buf, nullptr);
}

std::string_view to_string(PolylineLabel label) {
  switch (label) {
    case PolylineLabel::LaneCenter: return "lane-center";
    case PolylineLabel::LaneBoundary: return "lane-boundary";
    case PolylineLabel::RoadEdge: return "road-edge";
  }
  return "unknown";
}

PolylineLabel parse_label(std::string_view text) {
  if (text == "lane-center") return PolylineLabel::LaneCenter;
  if (text == "lane-boundary") return PolylineLabel::LaneBoundary;
  if (text == "road-edge") return PolylineLabel::RoadEdge;
  throw InputError("unknown polyline label '" + std::string(text) + "'");
}

std::string_view to_string(Command c) {
  switch (c) {
    case Command::Left: return "left";
    case Command::Straight: return "straight";
    case Command::Right: return "right";
  }
  return "unknown";
}

Command parse_command(std::string_view text) {
  if (text == "left") return Command::Left;
  if (text == "straight") return Command::Straight;
  if (text == "right") return Command::Right;
  throw InputError("unknown command '" + std::string(text) + "'");
}

void GeneratorSpec::validate() const {
  if (agent_count < 0 || agent_count > kMaxAgents)
    throw ConfigError("generator.agent_count", "must lie in [0, " + std::to_string(kMaxAgents) + "]");
  if (lane_count < 1 || lane_count > 4) throw ConfigError("generator.lane_count", "must lie in [1, 4]");
  if (!(min_speed > 0.0 && min_speed < 20.0))
    throw ConfigError("generator.min_speed", "must lie in (0, 20) m/s");
  if (!(max_speed > 0.0 && max_speed < 20.0))
    throw ConfigError("generator.max_speed", "must lie in (0, 20) m/s");
  if (min_speed > max_speed) throw ConfigError("generator.min_speed", "exceeds max_speed");
  if (!(max_accel >= 0.0)) throw ConfigError("generator.max_accel", "must be non-negative");
  if (!(turn_probability >= 0.0 && turn_probability <= 1.0))
    throw ConfigError("generator.turn_probability", "must lie in [0, 1]");
  if (!(ego_length > 0.0)) throw ConfigError("generator.ego_length", "must be positive");
  if (!(ego_width > 0.0)) throw ConfigError("generator.ego_width", "must be positive");
}

Scene generate_scene(std::uint64_t seed, const GeneratorSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(seed);
  Scene scene;
  scene.scene_id = static_cast<std::int64_t>(seed);

  const double v0 = uniform(rng, spec.min_speed, spec.max_speed);
  const double accel_bound =
      std::max(0.0, std::min({spec.max_accel, (v0 - 0.5) / 3.0, (19.5 - v0) / 3.0}));
  const double accel = uniform(rng, -accel_bound, accel_bound + 1e-12);
  auto arc_at = [&](int k) {
    const double t = k * kFramePeriod;
    return v0 * t + 0.5 * accel * t * t;
  };

  ReferencePath path;
  const bool turn = uniform(rng, 0.0, 1.0) < spec.turn_probability;
  const bool left = uniform(rng, 0.0, 1.0) < 0.5;
  const double radius = uniform(rng, 15.0, 30.0);
  const double sweep = uniform(rng, kPi / 4.0, kPi / 2.0);
  const double turn_frac = uniform(rng, -0.3, 1.0);
  if (turn) {
    path.curvature = (left ? 1.0 : -1.0) / radius;
    path.arc_length = sweep * radius;
    path.turn_start = turn_frac * arc_at(1);
  }

  const int ego_lane = std::uniform_int_distribution<int>(0, spec.lane_count - 1)(rng);
  const auto ego_pose = path.pose(0.0);
  const EgoFrame frame{ego_pose.point, ego_pose.heading};

  // ---- ego track and expert ----
  auto ego_point = [&](int k) { return path.pose(arc_at(k)).point; };
  // Velocity over the interval ending at frame k, so the current state never sees the future.
  auto ego_velocity = [&](int k) -> Vec2 { return (ego_point(k) - ego_point(k - 1)) / kFramePeriod; };
  const Vec2 ego_dims{spec.ego_length, spec.ego_width};
  scene.ego_track.agent_id = -1;
  for (int k = -kHistoryFrames; k <= 0; ++k) {
    AgentState s;
    s.position = frame.point(ego_point(k));
    s.yaw = frame.yaw(path.pose(arc_at(k)).heading);
    s.velocity = frame.vector(ego_velocity(k));
    s.dims = ego_dims;
    s.height = 1.56;
    s.mask = true;
    scene.ego_track.states.push_back(s);
  }
  for (int k = 1; k <= kFutureSteps; ++k) {
    const auto pose = path.pose(arc_at(k));
    const Vec2 p = frame.point(pose.point);
    const Vec2 v = frame.vector(ego_velocity(k));
    const Vec2 a = (v - frame.vector(ego_velocity(k - 1))) / kFramePeriod;
    const double yaw_next = path.pose(arc_at(k + 1)).heading;
    EgoStatus st{};
    st[status::kX] = p.x();
    st[status::kY] = p.y();
    st[status::kYaw] = frame.yaw(pose.heading);
    st[status::kVx] = v.x();
    st[status::kVy] = v.y();
    st[status::kAx] = a.x();
    st[status::kAy] = a.y();
    st[status::kYawRate] = wrap_angle(yaw_next - pose.heading) / kFramePeriod;
    st[status::kSpeed] = v.norm();
    st[status::kCurvature] = path.curvature_at(arc_at(k));
    scene.expert.future_traj.push_back(p);
    scene.expert.future_status.push_back(st);
  }

  // ---- map ----
  auto add_polyline = [&](double lateral, PolylineLabel label) {
    MapPolyline pl;
    pl.label = label;
    pl.valid = true;
    for (int i = 0; i < kPolylinePoints; ++i) {
      const double s = kPolylineStart + (kPolylineEnd - kPolylineStart) * i / (kPolylinePoints - 1);
      pl.points.push_back(frame.point(path.offset(s, lateral).point));
    }
    scene.map.push_back(std::move(pl));
  };
  for (int j = 0; j < spec.lane_count; ++j) add_polyline((j - ego_lane) * kLaneWidth, PolylineLabel::LaneCenter);
  for (int j = 0; j + 1 < spec.lane_count; ++j)
    add_polyline((j - ego_lane + 0.5) * kLaneWidth, PolylineLabel::LaneBoundary);
  const double right_edge = (-ego_lane - 0.5) * kLaneWidth;
  const double left_edge = (spec.lane_count - ego_lane - 0.5) * kLaneWidth;
  add_polyline(right_edge, PolylineLabel::RoadEdge);
  add_polyline(left_edge, PolylineLabel::RoadEdge);
  while (static_cast<int>(scene.map.size()) < kMaxPolylines) {
    MapPolyline pad;
    pad.points.assign(kPolylinePoints, Vec2::Zero());
    scene.map.push_back(std::move(pad));
  }

  // ---- agents ----
  for (int i = 0; i < kMaxAgents; ++i) {
    AgentTrack track;
    track.agent_id = i;
    std::vector<AgentBox> future(kFutureSteps);
    if (i < spec.agent_count) {
      double lateral = 0.0;
      double speed = 0.0;
      const bool moving = spec.lane_count > 1 && uniform(rng, 0.0, 1.0) < 0.75;
      double s0 = 0.0;
      if (moving) {
        int lane = std::uniform_int_distribution<int>(0, spec.lane_count - 2)(rng);
        if (lane >= ego_lane) ++lane;
        lateral = (lane - ego_lane) * kLaneWidth;
        speed = uniform(rng, spec.min_speed, spec.max_speed);
        s0 = uniform(rng, -20.0, 40.0);
      } else {
        const bool on_left = uniform(rng, 0.0, 1.0) < 0.5;
        lateral = on_left ? left_edge + 2.5 : right_edge - 2.5;
        s0 = uniform(rng, -10.0, 50.0);
      }
      const Vec2 dims{uniform(rng, 3.8, 5.2), uniform(rng, 1.6, 2.0)};
      const double height = uniform(rng, 1.4, 2.0);
      const int first_frame = uniform(rng, 0.0, 1.0) < 0.2
                                  ? std::uniform_int_distribution<int>(1, kHistoryFrames)(rng)
                                  : 0;
      auto pose_at = [&](int k) { return path.offset(s0 + speed * k * kFramePeriod, lateral); };
      for (int k = -kHistoryFrames; k <= 0; ++k) {
        AgentState s;
        if (k + kHistoryFrames >= first_frame) {
          const auto pose = pose_at(k);
          s.position = frame.point(pose.point);
          s.yaw = frame.yaw(pose.heading);
          s.velocity = frame.vector((pose.point - pose_at(k - 1).point) / kFramePeriod);
          s.dims = dims;
          s.height = height;
          s.mask = true;
        }
        track.states.push_back(s);
      }
      for (int k = 1; k <= kFutureSteps; ++k) {
        const auto pose = pose_at(k);
        future[k - 1] = AgentBox{frame.point(pose.point), frame.yaw(pose.heading), dims, true};
      }
    } else {
      track.states.assign(kTrackLength, AgentState{});
    }
    scene.agent_tracks.push_back(std::move(track));
    scene.agent_futures.push_back(std::move(future));
  }

  quantize_scene(scene);
  scene.expert.command = derive_command(scene.expert.future_traj);
  return scene;
}

Command derive_command(const std::vector<Vec2>& future_traj) {
  if (future_traj.size() < 2) throw InputError("derive_command needs at least 2 points");
  const std::size_t n = future_traj.size();
  const Vec2 first = future_traj[1] - future_traj[0];
  const Vec2 last = future_traj[n - 1] - future_traj[n - 2];
  const double change = wrap_angle(std::atan2(last.y(), last.x()) - std::atan2(first.y(), first.x()));
  if (change > kCommandThreshold) return Command::Left;
  if (change < -kCommandThreshold) return Command::Right;
  return Command::Straight;
}

std::vector<AgentStateDelta> vectorize_track(const AgentTrack& track) {
  std::vector<AgentStateDelta> out;
  out.reserve(track.states.size());
  for (std::size_t t = 0; t < track.states.size(); ++t) {
    const AgentState& s = track.states[t];
    AgentStateDelta d;
    d.dims = Eigen::Vector3d(s.dims.x(), s.dims.y(), s.height);
    d.mask = s.mask ? 1.0 : 0.0;
    if (t > 0 && s.mask && track.states[t - 1].mask) {
      const AgentState& prev = track.states[t - 1];
      d.dpos = s.position - prev.position;
      d.dyaw = wrap_angle(s.yaw - prev.yaw);
      d.dvel = s.velocity - prev.velocity;
    }
    if (!s.mask) d.dims.setZero();
    out.push_back(d);
  }
  return out;
}

MapFeatureSet derive_map_features(const MapPolyline& polyline) {
  const auto& pts = polyline.points;
  if (pts.size() < 2) throw InputError("polyline needs at least 2 points");
  MapFeatureSet f;
  f.label = polyline.label;
  f.center = pts[pts.size() / 2];
  for (std::size_t i = 1; i < pts.size(); ++i) {
    const Vec2 v = pts[i] - pts[i - 1];
    if (v.x() == 0.0 && v.y() == 0.0)
      throw DegenerateGeometryError("duplicate consecutive points at index " + std::to_string(i));
    f.vectors.push_back(v);
    f.headings.push_back(std::atan2(v.y(), v.x()));
  }
  for (const Vec2& p : pts) f.deviations.push_back(p - f.center);
  return f;
}

namespace {

std::array<Vec2, 4> corners(const OrientedBox& b) {
  const Vec2 ax{std::cos(b.yaw), std::sin(b.yaw)};
  const Vec2 ay{-ax.y(), ax.x()};
  const Vec2 hx = 0.5 * b.dims.x() * ax;
  const Vec2 hy = 0.5 * b.dims.y() * ay;
  return {b.center + hx + hy, b.center + hx - hy, b.center - hx - hy, b.center - hx + hy};
}

}  // namespace

bool boxes_overlap(const OrientedBox& a, const OrientedBox& b) {
  const auto ca = corners(a);
  const auto cb = corners(b);
  const std::array<Vec2, 4> axes{Vec2{std::cos(a.yaw), std::sin(a.yaw)}, Vec2{-std::sin(a.yaw), std::cos(a.yaw)},
                                 Vec2{std::cos(b.yaw), std::sin(b.yaw)}, Vec2{-std::sin(b.yaw), std::cos(b.yaw)}};
  for (const Vec2& axis : axes) {
    double amin = ca[0].dot(axis), amax = amin;
    double bmin = cb[0].dot(axis), bmax = bmin;
    for (int i = 1; i < 4; ++i) {
      const double pa = ca[i].dot(axis);
      const double pb = cb[i].dot(axis);
      amin = std::min(amin, pa);
      amax = std::max(amax, pa);
      bmin = std::min(bmin, pb);
      bmax = std::max(bmax, pb);
    }
    if (amax < bmin || bmax < amin) return false;
  }
  return true;
}

std::vector<bool> check_collision(const std::vector<Vec2>& traj, const Vec2& ego_dims,
                                  const std::vector<double>& yaw_seq,
                                  const std::vector<std::vector<AgentBox>>& agent_futures) {
  if (yaw_seq.size() != traj.size()) throw InputError("yaw sequence length differs from trajectory");
  for (const auto& f : agent_futures)
    if (f.size() != traj.size()) throw InputError("agent future horizon differs from trajectory");
  std::vector<bool> hit(traj.size(), false);
  for (std::size_t t = 0; t < traj.size(); ++t) {
    const OrientedBox ego{traj[t], yaw_seq[t], ego_dims};
    for (const auto& f : agent_futures) {
      const AgentBox& b = f[t];
      if (b.valid && boxes_overlap(ego, OrientedBox{b.center, b.yaw, b.dims})) {
        hit[t] = true;
        break;
      }
    }
  }
  return hit;
}

std::vector<double> trajectory_yaws(const std::vector<Vec2>& traj) {
  std::vector<double> yaws;
  yaws.reserve(traj.size());
  Vec2 prev = Vec2::Zero();
  double yaw = 0.0;
  for (const Vec2& p : traj) {
    const Vec2 d = p - prev;
    if (d.norm() > 1e-6) yaw = std::atan2(d.y(), d.x());
    yaws.push_back(yaw);
    prev = p;
  }
  return yaws;
}

}  // namespace distill
