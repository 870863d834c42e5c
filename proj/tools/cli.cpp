#include "cli.hpp"

#include "distill/ablation.hpp"
#include "distill/checkpoint.hpp"
#include "distill/config.hpp"
#include "distill/error.hpp"
#include "distill/metrics.hpp"
#include "distill/plot.hpp"
#include "distill/training.hpp"
#include "distill/vocabulary.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace distill::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

// Missing or unreadable inputs, reported with exit code 2.
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(what) {}
};

struct Options {
  std::string config;
  std::string out;
  std::string scenes;
  std::string vocab;
  std::string teacher;
  std::string ckpt;
  std::string matrix;
  std::string holdout;
  std::string features;
  std::string kind = "bev";
  std::optional<std::uint64_t> seed;
  int count = 100;
};

void require_file(const std::string& path, const std::string& flag) {
  if (path.empty()) throw DataError(flag + " is required");
  if (!fs::exists(path)) throw DataError(flag + " " + path + ": no such file or directory");
}

TrainingConfig resolve_config(const Options& o) {
  if (!o.config.empty()) require_file(o.config, "--config");
  return load_config(o.config);
}

// Every run records its resolved configuration next to its output.
void write_manifest(const fs::path& path, const std::string& command, const std::vector<std::string>& args,
                    const TrainingConfig& config, json extra) {
  json j = {{"command", command},
            {"argv", args},
            {"config", to_json(config)},
            {"config_digest", config_digest(config)}};
  for (auto& [k, v] : extra.items()) j[k] = v;
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

fs::path manifest_for_file(const fs::path& out) { return fs::path(out.string() + ".run.json"); }

std::string format_report(const OpenLoopReport& r) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "%-10s %8s %8s %8s %8s\n"
                "%-10s %8.4f %8.4f %8.4f %8.4f\n"
                "%-10s %8.2f %8.2f %8.2f %8.2f\n",
                "metric", "1s", "2s", "3s", "avg", "L2 (m)", r.l2[0], r.l2[1], r.l2[2], r.l2_avg, "Col. (%)",
                r.collision[0], r.collision[1], r.collision[2], r.collision_avg);
  return buf;
}

EpochCallback progress(std::ostream& err, const char* phase) {
  return [&err, phase](int epoch, const LossReport& r) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s epoch %d: l_t %.6f l_il %.6f l_rl %.6f l_kd %.6f l_ds %.6f\n", phase, epoch,
                  r.l_t, r.l_il, r.l_rl, r.l_kd, r.l_ds);
    err << buf;
  };
}

int gen_scenes(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  TrainingConfig config = resolve_config(o);
  if (o.count < 1) throw DataError("--count must be positive");
  const std::uint64_t seed = o.seed.value_or(config.seed);
  std::vector<Scene> scenes;
  scenes.reserve(static_cast<std::size_t>(o.count));
  for (int i = 0; i < o.count; ++i)
    scenes.push_back(generate_scene(derive_seed(seed, static_cast<std::uint64_t>(i)) >> 1, config.generator));
  write_scenes(scenes, o.out);
  write_manifest(manifest_for_file(o.out), "gen-scenes", args, config,
                 {{"seed", seed}, {"count", o.count}, {"outputs", {o.out}}});
  out << "wrote " << scenes.size() << " scenes to " << o.out << '\n';
  return kOk;
}

int cluster_vocab(const Options& o, const std::vector<std::string>& args, std::ostream& out) {
  TrainingConfig config = resolve_config(o);
  require_file(o.scenes, "--scenes");
  if (o.seed) config.vocabulary.seed = *o.seed;
  const std::vector<Scene> scenes = read_scenes(o.scenes);
  std::vector<Trajectory> trajs;
  for (const Scene& s : scenes) trajs.push_back(s.expert.future_traj);
  KMeansTrace trace;
  const PlanningVocabulary vocab =
      cluster_vocabulary(trajs, config.vocabulary.mode_count, config.vocabulary.seed, &trace);
  write_vocabulary(vocab, o.out);
  write_manifest(manifest_for_file(o.out), "cluster-vocab", args, config,
                 {{"inputs", {o.scenes}}, {"outputs", {o.out}}});
  out << "wrote " << vocab.size() << " modes to " << o.out << " (" << trace.iterations
      << " iterations, SSE " << (trace.objective.empty() ? 0.0 : trace.objective.back()) << ")\n";
  return kOk;
}

void print_final(std::ostream& out, const std::vector<LossReport>& history, const std::string& dir) {
  out << "saved checkpoint to " << dir << '\n';
  if (!history.empty()) out << "final losses: " << to_json(history.back()).dump() << '\n';
}

int train_teacher_cmd(const Options& o, const std::vector<std::string>& args, std::ostream& out,
                      std::ostream& err) {
  TrainingConfig config = resolve_config(o);
  require_file(o.scenes, "--scenes");
  require_file(o.vocab, "--vocab");
  if (o.seed) config.seed = *o.seed;
  const std::vector<Scene> scenes = read_scenes(o.scenes);
  const PlanningVocabulary vocab = read_vocabulary(o.vocab);
  TrainResult result = train_teacher(scenes, vocab, config, progress(err, "teacher"));
  save_checkpoint(*result.model, config, result.history, o.out);
  write_manifest(fs::path(o.out) / "run.json", "train-teacher", args, config,
                 {{"inputs", {o.scenes, o.vocab}}, {"outputs", {o.out}}});
  print_final(out, result.history, o.out);
  return kOk;
}

int train_student_cmd(const Options& o, const std::vector<std::string>& args, std::ostream& out,
                      std::ostream& err) {
  TrainingConfig config = resolve_config(o);
  require_file(o.scenes, "--scenes");
  require_file(o.teacher, "--teacher");
  if (o.seed) config.seed = *o.seed;
  const std::vector<Scene> scenes = read_scenes(o.scenes);
  LoadedCheckpoint teacher = load_checkpoint(o.teacher);
  TrainResult result = train_student(scenes, *teacher.model, config, progress(err, "student"));
  save_checkpoint(*result.model, config, result.history, o.out);
  write_manifest(fs::path(o.out) / "run.json", "train-student", args, config,
                 {{"inputs", {o.scenes, o.teacher}},
                  {"teacher_digest", teacher.manifest.weights_checksum},
                  {"outputs", {o.out}}});
  print_final(out, result.history, o.out);
  return kOk;
}

LoadedCheckpoint load_for_eval(const Options& o, std::ostream& err) {
  require_file(o.ckpt, "--ckpt");
  std::optional<TrainingConfig> expected;
  if (!o.config.empty()) expected = resolve_config(o);
  LoadedCheckpoint ckpt = load_checkpoint(o.ckpt, expected ? &*expected : nullptr);
  for (const std::string& w : ckpt.warnings) err << "warning: " << w << '\n';
  return ckpt;
}

int eval_cmd(const Options& o, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  require_file(o.scenes, "--scenes");
  LoadedCheckpoint ckpt = load_for_eval(o, err);
  const TrainingConfig& config = ckpt.manifest.config;
  const std::uint64_t seed = o.seed.value_or(0);
  const std::vector<Scene> scenes = read_scenes(o.scenes);

  AblationRow row;
  row.spec.id = fs::path(o.ckpt).filename().string();
  if (row.spec.id.empty()) row.spec.id = fs::path(o.ckpt).parent_path().filename().string();
  row.spec.toggles = config.toggles;
  row.spec.kd = config.kd;
  row.spec.rewards = config.rewards;
  row.seed = seed;
  row.run_id = make_run_id(row.spec, seed);
  row.report = evaluate(*ckpt.model, scenes, config, seed);

  const std::string report_path = o.out.empty() ? "eval_report.jsonl" : o.out;
  fs::remove(report_path);
  append_report_rows({row}, report_path);
  json outputs = {report_path};
  if (!o.features.empty()) {
    export_mode_features(*ckpt.model, scenes, config, seed, o.features);
    outputs.push_back(o.features);
  }
  write_manifest(manifest_for_file(report_path), "eval", args, config,
                 {{"seed", seed}, {"inputs", {o.ckpt, o.scenes}}, {"outputs", outputs}});
  out << format_report(row.report);
  return kOk;
}

int ablate_cmd(const Options& o, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  TrainingConfig config = resolve_config(o);
  require_file(o.matrix, "--matrix");
  require_file(o.scenes, "--scenes");
  require_file(o.teacher, "--teacher");
  if (!o.holdout.empty()) require_file(o.holdout, "--holdout");
  const AblationMatrix matrix = read_matrix(o.matrix);
  const std::vector<Scene> train = read_scenes(o.scenes);
  const std::vector<Scene> eval = o.holdout.empty() ? train : read_scenes(o.holdout);
  LoadedCheckpoint teacher = load_checkpoint(o.teacher);
  const std::string report_path = o.out.empty() ? "ablation_report.jsonl" : o.out;
  const std::vector<AblationRow> rows =
      run_ablation(matrix, train, eval, *teacher.model, config, report_path, &err);
  write_manifest(manifest_for_file(report_path), "ablate", args, config,
                 {{"inputs", {o.matrix, o.scenes, o.teacher, o.holdout}}, {"outputs", {report_path}}});
  out << render_table(rows);
  return kOk;
}

int plot_cmd(const Options& o, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  if (o.out.empty()) throw DataError("--out is required");
  TrainingConfig config;
  json inputs = json::array();
  if (o.kind == "bev") {
    require_file(o.scenes, "--scenes");
    const std::vector<Scene> scenes = read_scenes(o.scenes);
    std::optional<LoadedCheckpoint> ckpt;
    std::vector<Trajectory> preds;
    if (!o.ckpt.empty()) {
      ckpt = load_for_eval(o, err);
      config = ckpt->manifest.config;
      preds = predict_scenes(*ckpt->model, scenes, config, o.seed.value_or(0));
      inputs.push_back(o.ckpt);
    }
    fs::create_directories(o.out);
    const std::size_t n = std::min(scenes.size(), static_cast<std::size_t>(std::max(o.count, 0)));
    for (std::size_t i = 0; i < n; ++i) {
      const fs::path file = fs::path(o.out) / ("bev_" + std::to_string(scenes[i].scene_id) + ".svg");
      write_text(file, render_bev_svg(scenes[i], preds.empty() ? nullptr : &preds[i]));
    }
    inputs.push_back(o.scenes);
    write_manifest(fs::path(o.out) / "run.json", "plot", args, config, {{"inputs", inputs}, {"outputs", {o.out}}});
    out << "wrote " << n << " images to " << o.out << '\n';
  } else if (o.kind == "modes") {
    require_file(o.features, "--features");
    write_text(o.out, render_modes_svg(read_mode_features(o.features)));
    write_manifest(manifest_for_file(o.out), "plot", args, config,
                   {{"inputs", {o.features}}, {"outputs", {o.out}}});
    out << "wrote " << o.out << '\n';
  } else {
    LoadedCheckpoint ckpt = load_for_eval(o, err);
    config = ckpt.manifest.config;
    write_text(o.out, render_losses_svg(ckpt.manifest.history));
    write_manifest(manifest_for_file(o.out), "plot", args, config, {{"inputs", {o.ckpt}}, {"outputs", {o.out}}});
    out << "wrote " << o.out << '\n';
  }
  return kOk;
}

}  // namespace

int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Trajectory planning with teacher-student distillation"};
  app.name("distill");
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  Options o;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("--config", o.config, "JSON config file (DISTILL_* environment overrides apply)");
  };
  auto add_seed = [&](CLI::App* sub, const std::string& what) { sub->add_option("--seed", o.seed, what); };

  CLI::App* gen = app.add_subcommand("gen-scenes", "Generate synthetic scenes");
  add_config(gen);
  gen->add_option("--out", o.out, "Scene file to write")->required();
  add_seed(gen, "Generator seed (default: training.seed)");
  gen->add_option("--count", o.count, "Number of scenes")->capture_default_str();

  CLI::App* vocab = app.add_subcommand("cluster-vocab", "Cluster expert trajectories into a planning vocabulary");
  add_config(vocab);
  vocab->add_option("--scenes", o.scenes, "Scene file")->required();
  vocab->add_option("--out", o.out, "Vocabulary file to write")->required();
  add_seed(vocab, "k-means seed (default: vocabulary.seed)");

  CLI::App* teacher = app.add_subcommand("train-teacher", "Train the teacher on clean inputs");
  add_config(teacher);
  teacher->add_option("--scenes", o.scenes, "Training scene file")->required();
  teacher->add_option("--vocab", o.vocab, "Vocabulary file")->required();
  teacher->add_option("--out", o.out, "Checkpoint directory")->required();
  add_seed(teacher, "Training seed (default: training.seed)");

  CLI::App* student = app.add_subcommand("train-student", "Distill a student from a teacher checkpoint");
  add_config(student);
  student->add_option("--scenes", o.scenes, "Training scene file")->required();
  student->add_option("--teacher", o.teacher, "Teacher checkpoint directory")->required();
  student->add_option("--out", o.out, "Checkpoint directory")->required();
  add_seed(student, "Training seed (default: training.seed)");

  CLI::App* eval = app.add_subcommand("eval", "Open-loop evaluation of a checkpoint");
  add_config(eval);
  eval->add_option("--ckpt", o.ckpt, "Checkpoint directory")->required();
  eval->add_option("--scenes", o.scenes, "Evaluation scene file")->required();
  eval->add_option("--out", o.out, "Report file (default: eval_report.jsonl)");
  eval->add_option("--features", o.features, "Also export decoded mode features to this file");
  add_seed(eval, "Seed for the student's input perturbation (default: 0)");

  CLI::App* ablate = app.add_subcommand("ablate", "Train and evaluate every row of an ablation matrix");
  add_config(ablate);
  ablate->add_option("--matrix", o.matrix, "Ablation matrix file")->required();
  ablate->add_option("--scenes", o.scenes, "Training scene file")->required();
  ablate->add_option("--teacher", o.teacher, "Teacher checkpoint directory")->required();
  ablate->add_option("--holdout", o.holdout, "Evaluation scene file (default: the training scenes)");
  ablate->add_option("--out", o.out, "Report file, appended to (default: ablation_report.jsonl)");

  CLI::App* plot = app.add_subcommand("plot", "Render SVG plots");
  add_config(plot);
  plot->add_option("--kind", o.kind, "bev, modes or losses")
      ->check(CLI::IsMember({"bev", "modes", "losses"}))
      ->capture_default_str();
  plot->add_option("--out", o.out, "Output directory (bev) or file");
  plot->add_option("--scenes", o.scenes, "Scene file (bev)");
  plot->add_option("--ckpt", o.ckpt, "Checkpoint (bev predictions, losses)");
  plot->add_option("--features", o.features, "Mode feature export (modes)");
  plot->add_option("--count", o.count, "Maximum number of bev images")->capture_default_str();
  add_seed(plot, "Seed for the student's input perturbation (default: 0)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  std::vector<std::string> args(argv + 1, argv + argc);
  try {
    if (gen->parsed()) return gen_scenes(o, args, out);
    if (vocab->parsed()) return cluster_vocab(o, args, out);
    if (teacher->parsed()) return train_teacher_cmd(o, args, out, err);
    if (student->parsed()) return train_student_cmd(o, args, out, err);
    if (eval->parsed()) return eval_cmd(o, args, out, err);
    if (ablate->parsed()) return ablate_cmd(o, args, out, err);
    return plot_cmd(o, args, out, err);
  } catch (const NumericError& e) {
    err << "error: " << e.what() << '\n';
    return kDivergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
}

}  // namespace distill::cli
