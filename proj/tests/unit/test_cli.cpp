#include "fixtures.hpp"

#include "cli.hpp"

#include "distill/ablation.hpp"
#include "distill/checkpoint.hpp"
#include "distill/config.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace distill {
namespace {

namespace fs = std::filesystem;

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir = fs::temp_directory_path() / ("distill_cli_" + std::to_string(::getpid()) + "_" +
                                       ::testing::UnitTest::GetInstance()->current_test_info()->name());
    fs::remove_all(dir);
    fs::create_directories(dir);
    TrainingConfig c = testkit::tiny_config(4);
    c.teacher_epochs = 1;
    c.student_epochs = 1;
    save_config(c, p("config.json"));
  }
  void TearDown() override { fs::remove_all(dir); }

  std::string p(const std::string& name) const { return (dir / name).string(); }

  int run(std::vector<std::string> args) {
    args.insert(args.begin(), "distill");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    out.str("");
    err.str("");
    return cli::dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
  }

  fs::path dir;
  std::ostringstream out, err;
};

TEST_F(CliTest, FullPipeline) {
  const std::string cfg = p("config.json");
  ASSERT_EQ(run({"gen-scenes", "--config", cfg, "--out", p("train.jsonl"), "--count", "8", "--seed", "3"}), 0)
      << err.str();
  ASSERT_EQ(run({"gen-scenes", "--config", cfg, "--out", p("eval.jsonl"), "--count", "4", "--seed", "4"}), 0);
  EXPECT_TRUE(fs::exists(p("train.jsonl.run.json")));
  ASSERT_EQ(run({"cluster-vocab", "--config", cfg, "--scenes", p("train.jsonl"), "--out", p("vocab.jsonl")}), 0)
      << err.str();
  ASSERT_EQ(run({"train-teacher", "--config", cfg, "--scenes", p("train.jsonl"), "--vocab", p("vocab.jsonl"), "--out",
                 p("teacher")}),
            0)
      << err.str();
  EXPECT_TRUE(fs::exists(dir / "teacher" / "run.json"));
  ASSERT_EQ(run({"train-student", "--config", cfg, "--scenes", p("train.jsonl"), "--teacher", p("teacher"), "--out",
                 p("student")}),
            0)
      << err.str();
  EXPECT_EQ(load_checkpoint(p("student")).manifest.phase, Phase::Student);
  ASSERT_EQ(run({"eval", "--config", cfg, "--ckpt", p("student"), "--scenes", p("eval.jsonl"), "--out",
                 p("report.jsonl"), "--features", p("features.jsonl")}),
            0)
      << err.str();
  EXPECT_EQ(read_report(p("report.jsonl")).size(), 1u);
  EXPECT_NE(out.str().find("L2"), std::string::npos);
  EXPECT_EQ(run({"plot", "--kind", "modes", "--features", p("features.jsonl"), "--out", p("modes.svg")}), 0);
  EXPECT_EQ(run({"plot", "--kind", "losses", "--ckpt", p("student"), "--out", p("losses.svg")}), 0);
  EXPECT_EQ(run({"plot", "--kind", "bev", "--scenes", p("eval.jsonl"), "--ckpt", p("student"), "--out", p("bev"),
                 "--count", "2"}),
            0);
  EXPECT_TRUE(fs::exists(p("modes.svg")));
  EXPECT_TRUE(fs::exists(p("losses.svg")));
  std::size_t images = 0;
  for (const auto& e : fs::directory_iterator(dir / "bev")) images += e.path().extension() == ".svg";
  EXPECT_EQ(images, 2u);

  std::ofstream(p("matrix.json")) << R"({"seeds": [1], "rows": [{"id": "plain", "toggles": {"rl": false, "kd": false, "generative": false}}]})";
  EXPECT_EQ(run({"ablate", "--config", cfg, "--matrix", p("matrix.json"), "--scenes", p("train.jsonl"), "--teacher",
                 p("teacher"), "--holdout", p("eval.jsonl"), "--out", p("ablation.jsonl")}),
            0)
      << err.str();
  EXPECT_NE(out.str().find("plain"), std::string::npos);
  EXPECT_EQ(run({"train-student", "--config", cfg, "--scenes", p("train.jsonl"), "--teacher", p("student"), "--out",
                 p("student2")}),
            2);
}

TEST_F(CliTest, SameSeedSameScenes) {
  ASSERT_EQ(run({"gen-scenes", "--out", p("a.jsonl"), "--count", "3", "--seed", "9"}), 0);
  ASSERT_EQ(run({"gen-scenes", "--out", p("b.jsonl"), "--count", "3", "--seed", "9"}), 0);
  EXPECT_EQ(read_scenes(p("a.jsonl")), read_scenes(p("b.jsonl")));
}

TEST_F(CliTest, UsageErrorsExitOne) {
  EXPECT_EQ(run({}), 1);
  EXPECT_EQ(run({"bogus"}), 1);
  EXPECT_EQ(run({"train-student", "--scenes", "x", "--out", "y"}), 1);
  EXPECT_EQ(run({"gen-scenes", "--out", p("x.jsonl"), "--frobnicate"}), 1);
  EXPECT_EQ(run({"--help"}), 0);
}

TEST_F(CliTest, DataErrorsExitTwo) {
  EXPECT_EQ(run({"cluster-vocab", "--scenes", p("missing.jsonl"), "--out", p("v.jsonl")}), 2);
  EXPECT_EQ(run({"eval", "--ckpt", p("missing"), "--scenes", p("missing.jsonl")}), 2);
  std::ofstream(p("bad.json")) << R"({"training": {"nope": 1}})";
  EXPECT_EQ(run({"gen-scenes", "--config", p("bad.json"), "--out", p("s.jsonl")}), 2);
  EXPECT_NE(err.str().find("training.nope"), std::string::npos);
}

}  // namespace
}  // namespace distill
