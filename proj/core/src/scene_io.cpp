#include "distill/error.hpp"
#include "distill/record_io.hpp"
#include "distill/scene.hpp"

namespace distill {

namespace io {

RecordWriter::RecordWriter(const std::filesystem::path& path, const std::string& format, int version,
                           bool append)
    : path_(path) {
  const bool existing = append && std::filesystem::exists(path) && std::filesystem::file_size(path) > 0;
  if (existing) {
    const json header = read_header(path);
    if (header.value("format", "") != format || header.value("version", -1) != version)
      throw FormatError(format + " v" + std::to_string(version), header.dump(), "cannot append to " + path.string());
  }
  out_.open(path, append ? std::ios::app : std::ios::trunc);
  if (!out_) throw InputError("cannot open " + path.string() + " for writing");
  if (!existing) out_ << json{{"format", format}, {"version", version}}.dump() << '\n';
}

void RecordWriter::write(const json& record) {
  out_ << record.dump() << '\n';
  if (!out_) throw InputError("write failed on " + path_.string());
}

json read_header(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError(1, "missing header in " + path.string());
  try {
    return json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(1, std::string("bad header: ") + e.what());
  }
}

void read_records(const std::filesystem::path& path, const std::string& format, int version,
                  const std::function<void(const json&, std::size_t)>& visit) {
  const json header = read_header(path);
  const std::string found_format = header.is_object() ? header.value("format", std::string{}) : "";
  if (found_format != format)
    throw FormatError(format, found_format.empty() ? "<none>" : found_format, "unexpected file format");
  const json v = header.value("version", json());
  const std::string found_version = v.is_null() ? "<none>" : (v.is_string() ? v.get<std::string>() : v.dump());
  if (!v.is_number_integer() || v.get<int>() != version)
    throw FormatError(std::to_string(version), found_version, format + " version mismatch");

  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    }
    try {
      visit(record, line_no);
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    } catch (const InputError& e) {
      throw ParseError(line_no, e.what());
    }
  }
}

}  // namespace io

namespace {

using io::json;

json vec_json(const Vec2& v) { return json::array({quantize(v.x()), quantize(v.y())}); }

Vec2 vec_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw InputError("expected a 2-vector");
  return {j[0].get<double>(), j[1].get<double>()};
}

json state_json(const AgentState& s) {
  return {{"position", vec_json(s.position)}, {"yaw", quantize(s.yaw)}, {"velocity", vec_json(s.velocity)},
          {"dims", vec_json(s.dims)},         {"height", quantize(s.height)}, {"mask", s.mask ? 1 : 0}};
}

AgentState state_from(const json& j) {
  AgentState s;
  s.position = vec_from(j.at("position"));
  s.yaw = j.at("yaw").get<double>();
  s.velocity = vec_from(j.at("velocity"));
  s.dims = vec_from(j.at("dims"));
  s.height = j.at("height").get<double>();
  s.mask = j.at("mask").get<int>() != 0;
  return s;
}

json track_json(const AgentTrack& t) {
  json states = json::array();
  for (const auto& s : t.states) states.push_back(state_json(s));
  return {{"agent_id", t.agent_id}, {"states", states}};
}

AgentTrack track_from(const json& j) {
  AgentTrack t;
  t.agent_id = j.at("agent_id").get<std::int64_t>();
  for (const auto& s : j.at("states")) t.states.push_back(state_from(s));
  return t;
}

json scene_json(const Scene& s) {
  json agents = json::array();
  for (const auto& t : s.agent_tracks) agents.push_back(track_json(t));
  json map = json::array();
  for (const auto& pl : s.map) {
    json pts = json::array();
    for (const auto& p : pl.points) pts.push_back(vec_json(p));
    map.push_back({{"label", to_string(pl.label)}, {"valid", pl.valid}, {"points", pts}});
  }
  json traj = json::array();
  for (const auto& p : s.expert.future_traj) traj.push_back(vec_json(p));
  json status = json::array();
  for (const auto& st : s.expert.future_status) {
    json row = json::array();
    for (double v : st) row.push_back(quantize(v));
    status.push_back(row);
  }
  json futures = json::array();
  for (const auto& boxes : s.agent_futures) {
    json row = json::array();
    for (const auto& b : boxes)
      row.push_back({{"center", vec_json(b.center)}, {"yaw", quantize(b.yaw)}, {"dims", vec_json(b.dims)},
                     {"valid", b.valid}});
    futures.push_back(row);
  }
  return {{"scene_id", s.scene_id},
          {"ego_track", track_json(s.ego_track)},
          {"agent_tracks", agents},
          {"map", map},
          {"expert", {{"future_traj", traj}, {"future_status", status}, {"command", to_string(s.expert.command)}}},
          {"agent_futures", futures}};
}

Scene scene_from(const json& j) {
  Scene s;
  s.scene_id = j.at("scene_id").get<std::int64_t>();
  s.ego_track = track_from(j.at("ego_track"));
  for (const auto& t : j.at("agent_tracks")) s.agent_tracks.push_back(track_from(t));
  for (const auto& m : j.at("map")) {
    MapPolyline pl;
    pl.label = parse_label(m.at("label").get<std::string>());
    pl.valid = m.at("valid").get<bool>();
    for (const auto& p : m.at("points")) pl.points.push_back(vec_from(p));
    s.map.push_back(std::move(pl));
  }
  const json& e = j.at("expert");
  for (const auto& p : e.at("future_traj")) s.expert.future_traj.push_back(vec_from(p));
  for (const auto& row : e.at("future_status")) {
    if (row.size() != kStatusDim) throw InputError("ego status must have 10 components");
    EgoStatus st{};
    for (int i = 0; i < kStatusDim; ++i) st[i] = row[i].get<double>();
    s.expert.future_status.push_back(st);
  }
  s.expert.command = parse_command(e.at("command").get<std::string>());
  for (const auto& row : j.at("agent_futures")) {
    std::vector<AgentBox> boxes;
    for (const auto& b : row)
      boxes.push_back(AgentBox{vec_from(b.at("center")), b.at("yaw").get<double>(), vec_from(b.at("dims")),
                               b.at("valid").get<bool>()});
    s.agent_futures.push_back(std::move(boxes));
  }
  return s;
}

}  // namespace

void write_scenes(const std::vector<Scene>& scenes, const std::filesystem::path& path) {
  io::RecordWriter w(path, "distill-scenes", 1);
  for (const auto& s : scenes) w.write(scene_json(s));
}

std::vector<Scene> read_scenes(const std::filesystem::path& path) {
  std::vector<Scene> out;
  io::read_records(path, "distill-scenes", 1,
                   [&](const io::json& rec, std::size_t) { out.push_back(scene_from(rec)); });
  return out;
}

}  // namespace distill
