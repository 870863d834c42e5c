#include "distill/checkpoint.hpp"

#include "distill/error.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

namespace distill {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string serialize_weights(const nn::ParameterStore& store) {
  std::string bytes;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const Mat& v = store[i].value;
    bytes.append(reinterpret_cast<const char*>(v.data()), static_cast<std::size_t>(v.size()) * sizeof(double));
  }
  return bytes;
}

}  // namespace

void save_checkpoint(const Planner& model, const TrainingConfig& config, const std::vector<LossReport>& history,
                     const fs::path& dir) {
  fs::create_directories(dir);
  const std::string bytes = serialize_weights(model.parameters());
  {
    std::ofstream out(dir / "weights.bin", std::ios::binary);
    if (!out) throw InputError("cannot write " + (dir / "weights.bin").string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  write_vocabulary(model.vocabulary(), dir / "vocab.jsonl");

  json params = json::array();
  for (std::size_t i = 0; i < model.parameters().size(); ++i) {
    const ad::Parameter& p = model.parameters()[i];
    params.push_back({{"name", p.name}, {"rows", p.value.rows()}, {"cols", p.value.cols()}});
  }
  json hist = json::array();
  for (const LossReport& r : history) hist.push_back(to_json(r));
  const json manifest = {
      {"format", kCheckpointFormat},
      {"version", kCheckpointVersion},
      {"phase", std::string(to_string(model.phase()))},
      {"epoch", static_cast<int>(history.size())},
      {"config_digest", config_digest(config)},
      {"config", to_json(config)},
      {"loss_history", hist},
      {"weights", {{"file", "weights.bin"}, {"checksum", fnv1a_hex(bytes)}, {"parameters", params}}},
  };
  std::ofstream out(dir / "manifest.json");
  if (!out) throw InputError("cannot write " + (dir / "manifest.json").string());
  out << manifest.dump(2) << '\n';
}

LoadedCheckpoint load_checkpoint(const fs::path& dir, const TrainingConfig* expected) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw InputError("no checkpoint manifest in " + dir.string());
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(1, std::string("checkpoint manifest: ") + e.what());
  }
  const std::string format = m.value("format", std::string("<missing>"));
  if (format != kCheckpointFormat) throw FormatError(kCheckpointFormat, format, "checkpoint manifest");
  const int version = m.value("version", -1);
  if (version != kCheckpointVersion)
    throw FormatError(std::to_string(kCheckpointVersion), std::to_string(version), "checkpoint manifest version");

  LoadedCheckpoint out;
  CheckpointManifest& man = out.manifest;
  try {
    man.version = version;
    man.phase = parse_phase(m.at("phase").get<std::string>());
    man.epoch = m.at("epoch").get<int>();
    man.config_digest = m.at("config_digest").get<std::string>();
    man.config = config_from_json(m.at("config"));
    for (const json& r : m.at("loss_history")) man.history.push_back(loss_report_from_json(r));
    man.weights_checksum = m.at("weights").at("checksum").get<std::string>();
  } catch (const json::exception& e) {
    throw IntegrityError(std::string("checkpoint manifest is incomplete: ") + e.what());
  }
  if (config_digest(man.config) != man.config_digest)
    throw IntegrityError("manifest config does not match its digest");
  if (expected != nullptr && config_digest(*expected) != man.config_digest)
    out.warnings.push_back("checkpoint config digest " + man.config_digest + " differs from the active config " +
                           config_digest(*expected));

  std::ifstream wf(dir / "weights.bin", std::ios::binary);
  if (!wf) throw IntegrityError("missing weights.bin in " + dir.string());
  std::ostringstream ss;
  ss << wf.rdbuf();
  const std::string bytes = ss.str();
  if (fnv1a_hex(bytes) != man.weights_checksum) throw IntegrityError("weights.bin checksum mismatch");

  out.model = std::make_unique<Planner>(man.config.model, read_vocabulary(dir / "vocab.jsonl"), man.phase,
                                        man.config.gamma, man.config.seed);
  nn::ParameterStore& store = out.model->parameters();
  const json& params = m.at("weights").at("parameters");
  if (params.size() != store.size())
    throw IntegrityError("checkpoint has " + std::to_string(params.size()) + " parameters, model expects " +
                         std::to_string(store.size()));
  std::size_t offset = 0;
  for (std::size_t i = 0; i < store.size(); ++i) {
    ad::Parameter& p = store[i];
    const json& e = params[i];
    if (e.at("name").get<std::string>() != p.name || e.at("rows").get<Eigen::Index>() != p.value.rows() ||
        e.at("cols").get<Eigen::Index>() != p.value.cols())
      throw IntegrityError("parameter layout mismatch at " + p.name);
    const std::size_t n = static_cast<std::size_t>(p.value.size()) * sizeof(double);
    if (offset + n > bytes.size()) throw IntegrityError("weights.bin is truncated");
    std::memcpy(p.value.data(), bytes.data() + offset, n);
    offset += n;
  }
  if (offset != bytes.size()) throw IntegrityError("weights.bin has trailing bytes");
  return out;
}

}  // namespace distill
