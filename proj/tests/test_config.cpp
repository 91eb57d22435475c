#include "rcaux/config.hpp"

#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>

namespace {

using namespace rcaux;

TEST(Defaults, EnvProfilesSelectPlannerAndTrainKnobs) {
  const RunConfig wall = defaults_for_env("wall");
  EXPECT_EQ(wall.planner.H, 8);
  EXPECT_EQ(wall.planner.n_samples, 600);
  EXPECT_DOUBLE_EQ(wall.planner.lambda_plan, 0.85);
  EXPECT_EQ(wall.planner.budget, 60);
  EXPECT_DOUBLE_EQ(wall.train.alpha, 1.0);
  EXPECT_EQ(wall.train.epochs, 200);
  EXPECT_DOUBLE_EQ(wall.train.omega1, 3.0);

  const RunConfig two = defaults_for_env("tworoom");
  EXPECT_EQ(two.planner.H, 6);
  EXPECT_EQ(two.planner.budget, 50);

  EXPECT_THROW(defaults_for_env("moon"), ConfigError);
}

TEST(ParseConfigText, SectionsCommentsAndTrimming) {
  const std::string text =
      "# leading comment\n"
      "\n"
      "[run]\n"
      "  env = wall  \n"
      "seed=7\n"
      "[planner]\n"
      "lambda_plan = 0.5\n";
  const auto kvs = parse_config_text(text);
  ASSERT_EQ(kvs.size(), 3u);
  EXPECT_EQ(kvs[0].section, "run");
  EXPECT_EQ(kvs[0].key, "env");
  EXPECT_EQ(kvs[0].value, "wall");
  EXPECT_EQ(kvs[1].key, "seed");
  EXPECT_EQ(kvs[1].value, "7");
  EXPECT_EQ(kvs[2].section, "planner");

  EXPECT_THROW(parse_config_text("[run\nenv = wall\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[mystery]\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[run]\njust words\n"), ConfigError);
  EXPECT_THROW(parse_config_text("env = wall\n"), ConfigError);
  EXPECT_THROW(parse_config_text("[run]\n= wall\n"), ConfigError);
}

TEST(ApplyConfigValue, TypedParsingAndUnknownKeys) {
  RunConfig c = defaults_for_env("open");
  apply_config_value(c, "train", "alpha", "0.25");
  EXPECT_DOUBLE_EQ(c.train.alpha, 0.25);
  apply_config_value(c, "planner", "gated", "false");
  EXPECT_FALSE(c.planner.gated);
  apply_config_value(c, "planner", "gated", "1");
  EXPECT_TRUE(c.planner.gated);
  apply_config_value(c, "run", "seed", "12345678901234");
  EXPECT_EQ(c.seed, 12345678901234ull);

  EXPECT_THROW(apply_config_value(c, "train", "gamma", "1"), ConfigError);
  EXPECT_THROW(apply_config_value(c, "planner", "gated", "maybe"), ConfigError);
  EXPECT_THROW(apply_config_value(c, "train", "epochs", "3x"), ConfigError);
  EXPECT_THROW(apply_config_value(c, "train", "alpha", ""), ConfigError);
}

TEST(LoadRunConfig, FileOverridesDefaultsFlagsOverrideFile) {
  const std::string path = "test_config_tmp.cfg";
  {
    std::ofstream os(path);
    os << "[run]\nenv = wall\nseed = 3\n[planner]\nn_iters = 12\n";
  }
  const RunConfig c = load_run_config(path);
  EXPECT_EQ(c.env, "wall");
  EXPECT_EQ(c.seed, 3ull);
  EXPECT_EQ(c.planner.n_iters, 12);    // file override
  EXPECT_EQ(c.planner.n_samples, 600); // wall profile default kept

  // Kebab-case bare flags override the file; section-qualified works too.
  const RunConfig f = load_run_config(
      path, {{"lambda-plan", "0.5"}, {"train.epochs", "9"}, {"seed", "8"}});
  EXPECT_DOUBLE_EQ(f.planner.lambda_plan, 0.5);
  EXPECT_EQ(f.train.epochs, 9);
  EXPECT_EQ(f.seed, 8ull);

  // A flag env switches which profile supplies the remaining defaults.
  const RunConfig swapped = load_run_config(path, {{"env", "tworoom"}});
  EXPECT_EQ(swapped.env, "tworoom");
  EXPECT_EQ(swapped.planner.n_samples, 300);
  EXPECT_EQ(swapped.planner.n_iters, 12);  // explicit file key still applies

  EXPECT_THROW(load_run_config(path, {{"warp-speed", "9"}}), ConfigError);
  EXPECT_THROW(load_run_config("no_such_file.cfg"), MissingFileError);
  std::remove(path.c_str());
}

TEST(LoadRunConfig, RcauxSeedEnvVarWinsOverFlags) {
  ASSERT_EQ(setenv("RCAUX_SEED", "424242", 1), 0);
  const RunConfig c = load_run_config("", {{"seed", "5"}});
  EXPECT_EQ(c.seed, 424242ull);
  ASSERT_EQ(setenv("RCAUX_SEED", "not-a-number", 1), 0);
  EXPECT_THROW(load_run_config(""), ConfigError);
  ASSERT_EQ(unsetenv("RCAUX_SEED"), 0);
  const RunConfig d = load_run_config("", {{"seed", "5"}});
  EXPECT_EQ(d.seed, 5ull);
}

TEST(ValidateRunConfig, RejectsInconsistentSettings) {
  RunConfig c = defaults_for_env("wall");
  c.planner.H = c.train.H_max + 2;
  EXPECT_THROW(validate_run_config(c), ConfigError);

  c = defaults_for_env("wall");
  c.train.mode = "mystery";
  EXPECT_THROW(validate_run_config(c), ConfigError);

  c = defaults_for_env("wall");
  c.policy = "teleport";
  EXPECT_THROW(validate_run_config(c), ConfigError);

  c = defaults_for_env("wall");
  c.traj_len = 1;
  EXPECT_THROW(validate_run_config(c), ConfigError);

  EXPECT_NO_THROW(validate_run_config(defaults_for_env("wall")));
}

TEST(RenderConfig, BitExactRoundTrip) {
  RunConfig c = defaults_for_env("wall");
  c.seed = 99;
  c.train.lr = 0.0003;
  c.planner.lambda_plan = 0.85;
  const std::string text = render_config(c);
  EXPECT_NE(text.find("[planner]\n"), std::string::npos);
  EXPECT_NE(text.find("lambda_plan = 0.85\n"), std::string::npos);
  EXPECT_NE(text.find("seed = 99\n"), std::string::npos);

  const std::string path = "test_config_echo.cfg";
  write_config(path, c);
  const RunConfig back = load_run_config(path);
  EXPECT_EQ(render_config(back), text);
  std::remove(path.c_str());
}

}  // namespace
