#include "distill/config.hpp"
#include "distill/error.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

namespace distill {
namespace {

using nlohmann::json;

TEST(Config, DefaultLossWeights) {
  const TrainingConfig c;
  EXPECT_EQ(c.kd_weight, 0.5);
  EXPECT_EQ(c.ds_weight, 1.0);
  EXPECT_EQ(c.rl_weight, 1.0);
  EXPECT_EQ(c.gamma, 0.95);
  EXPECT_EQ(c.zeta, 0.5);
  EXPECT_EQ(c.vocabulary.mode_count, 32);
}

TEST(Config, JsonRoundTrip) {
  TrainingConfig c;
  c.learning_rate = 3e-3;
  c.toggles.kd = false;
  c.kd.reg = true;
  c.rewards[4] = false;
  c.generator.agent_count = 2;
  c.model.dim = 32;
  c.noise.dropout = 0.25;
  const TrainingConfig back = config_from_json(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(config_digest(back), config_digest(c));
}

TEST(Config, PartialJsonKeepsDefaults) {
  const TrainingConfig c = config_from_json(json{{"training", {{"batch_size", 8}}}});
  EXPECT_EQ(c.batch_size, 8);
  EXPECT_EQ(c.learning_rate, TrainingConfig{}.learning_rate);
}

TEST(Config, UnknownKeyNamesTheField) {
  try {
    config_from_json(json{{"training", {{"learning_rat", 1.0}}}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "training.learning_rat");
  }
  EXPECT_THROW(config_from_json(json{{"optimizer", json::object()}}), ConfigError);
}

TEST(Config, WrongTypeAndRangeAreConfigErrors) {
  EXPECT_THROW(config_from_json(json{{"training", {{"batch_size", "four"}}}}), ConfigError);
  try {
    config_from_json(json{{"training", {{"gamma", 1.0}}}});
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_EQ(e.field(), "training.gamma");
  }
  EXPECT_THROW(config_from_json(json{{"training", {{"kd_weight", -0.1}}}}), ConfigError);
  EXPECT_THROW(config_from_json(json{{"model", {{"heads", 3}}}}), ConfigError);
}

TEST(Config, EnvironmentOverrides) {
  const json base{{"training", {{"batch_size", 8}}}};
  const json j = apply_environment_overrides(
      base, {{"DISTILL_TRAINING__LEARNING_RATE", "0.001"}, {"DISTILL_TOGGLES__KD", "false"}, {"OTHER", "1"}});
  const TrainingConfig c = config_from_json(j);
  EXPECT_EQ(c.learning_rate, 0.001);
  EXPECT_FALSE(c.toggles.kd);
  EXPECT_EQ(c.batch_size, 8);
  EXPECT_THROW(apply_environment_overrides(base, {{"DISTILL_LEARNING_RATE", "1"}}), ConfigError);
}

TEST(Config, LoadAppliesProcessEnvironment) {
  const auto path = std::filesystem::temp_directory_path() / "distill_config_test.json";
  {
    std::ofstream out(path);
    out << R"({"training": {"seed": 5}})";
  }
  ::setenv("DISTILL_TRAINING__SEED", "9", 1);
  const TrainingConfig c = load_config(path);
  ::unsetenv("DISTILL_TRAINING__SEED");
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(load_config(path).seed, 5u);
  std::filesystem::remove(path);
  EXPECT_THROW(load_config(path), ConfigError);
}

TEST(Config, DigestTracksContent) {
  TrainingConfig a, b;
  EXPECT_EQ(config_digest(a), config_digest(b));
  EXPECT_EQ(config_digest(a).size(), 16u);
  b.zeta = 0.6;
  EXPECT_NE(config_digest(a), config_digest(b));
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
}

}  // namespace
}  // namespace distill
