#include <gtest/gtest.h>

#include <filesystem>
#include <map>
#include <sstream>

#include "cmbrl/config.hpp"
#include "cmbrl/errors.hpp"

namespace cmbrl::config {
namespace {

// "section.key" -> raw value text, read independently of the parser.
std::map<std::string, std::string> flatten(const std::string& ini) {
  std::map<std::string, std::string> out;
  std::istringstream in(ini);
  std::string line, section;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line.front() == '[') {
      section = line.substr(1, line.size() - 2);
      continue;
    }
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) continue;
    out[section + "." + line.substr(0, eq)] = line.substr(eq + 3);
  }
  return out;
}

int line_of(const std::string& text) {
  try {
    parse(text);
  } catch (const ConfigError& e) {
    return e.line();
  }
  return -1;
}

TEST(Manifest, DefaultsCarryReferenceHyperparameters) {
  const auto m = flatten(manifest_text(ExperimentConfig{}));
  auto num = [&](const std::string& key) { return std::stod(m.at(key)); };
  EXPECT_EQ(num("sac.gamma"), 0.99);
  EXPECT_EQ(num("sac.lr_actor"), 0.00005);
  EXPECT_EQ(num("sac.lr_critic"), 0.0002);
  EXPECT_EQ(num("sac.batch_size"), 1024);
  EXPECT_EQ(num("sac.policy_update_every"), 2);
  EXPECT_EQ(num("buffers.real_capacity"), 35000);
  EXPECT_EQ(num("buffers.synthetic_capacity"), 35000);
  EXPECT_EQ(num("buffers.hypernet_capacity"), 4000);
  EXPECT_EQ(num("hypernet.lr"), 0.0001);
  EXPECT_EQ(num("hypernet.beta"), 0.1);
  EXPECT_EQ(num("hypernet.synthetic_per_step"), 10);
  EXPECT_EQ(num("hypernet.ensemble_size"), 100);
  EXPECT_EQ(num("env.steps_per_episode"), 1344);
  EXPECT_EQ(m.at("manifest.code_version"), code_version());
  EXPECT_EQ(m.at("experiment.master_seed"), "1");
}

TEST(Parse, EmptyTextGivesDefaults) {
  EXPECT_EQ(parse(""), ExperimentConfig{});
  EXPECT_EQ(parse("# comment only\n; another\n\n"), ExperimentConfig{});
}

TEST(Parse, RoundTrip) {
  ExperimentConfig c;
  c.master_seed = 12345678901234ULL;
  c.variants = {Variant::kMfrl};
  c.output_dir = "runs/x y";
  c.checkpoint_every_steps = 500;
  c.dyna.sac.gamma = 0.1 + 0.2;
  c.dyna.sac.actor_hidden = {7, 9, 3};
  c.dyna.grid.levels = {0.0, 1.0 / 3.0, 1.0};
  c.dyna.world.norm.forecast = hyperworld::ForecastSummary::kMean;
  c.dyna.world.noise_sigma = 1e-300;
  c.dyna.env.weather_noise_sigma = 0.0;
  c.dyna.task_sequence = {3, 1};
  c.dyna.episodes_per_task = {4, 0, 9};
  c.dyna.eval_scenarios = {envsim::Scenario::kAprilLike};
  c.dyna.carry_hypernet_buffer = false;
  c.dyna.record_wall_clock = true;
  const auto back = parse(to_ini(c));
  EXPECT_EQ(back, c);
  EXPECT_EQ(back.dyna.sac.gamma, c.dyna.sac.gamma);
  EXPECT_EQ(back.dyna.grid.levels, c.dyna.grid.levels);
  EXPECT_EQ(back.dyna.world.noise_sigma, 1e-300);
  EXPECT_EQ(back.master_seed, 12345678901234ULL);
  // The manifest parses back too; its own section is ignored.
  EXPECT_EQ(parse(manifest_text(c)), c);
}

TEST(Parse, PartialOverride) {
  const auto c = parse("[sac]\nbatch_size = 64\n\n[experiment]\nvariants = mfrl\n");
  EXPECT_EQ(c.dyna.batch_size, 64u);
  EXPECT_EQ(c.variants, std::vector<Variant>{Variant::kMfrl});
  EXPECT_EQ(c.dyna.sac.gamma, 0.99);
}

TEST(Parse, ErrorsNameTheLine) {
  EXPECT_EQ(line_of("[sac]\ngamma = 0.9\nbogus = 1\n"), 3);
  EXPECT_EQ(line_of("[nowhere]\n"), 1);
  EXPECT_EQ(line_of("gamma = 0.9\n"), 1);
  EXPECT_EQ(line_of("[sac]\n\ngamma = abc\n"), 3);
  EXPECT_EQ(line_of("[sac]\ngamma = 0.9\ngamma = 0.8\n"), 3);
  EXPECT_EQ(line_of("[sac]\nthis line has no equals\n"), 2);
  EXPECT_EQ(line_of("[experiment]\nvariants = mbrl, dqn\n"), 2);
  EXPECT_EQ(line_of("[sac]\nbatch_size = -4\n"), 2);
  try {
    parse("[sac]\ngamma = 0.9\nbogus = 1\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("bogus"), std::string::npos);
  }
}

TEST(Parse, RejectsInconsistentValues) {
  EXPECT_THROW(parse("[sac]\nreal_fraction = 2\n"), ConfigError);
  EXPECT_THROW(parse("[experiment]\ntask_sequence = 1, 5\n"), ConfigError);
  EXPECT_THROW(parse("[sac]\naction_grid = 0.5, 0.2\n"), ConfigError);
}

TEST(Load, MissingFileNamesPath) {
  try {
    load("/nonexistent/cfg.ini");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/cfg.ini"), std::string::npos);
  }
}

TEST(Load, WriteManifestThenLoad) {
  const auto path = std::filesystem::temp_directory_path() / "cmbrl_test_manifest.ini";
  ExperimentConfig c;
  c.master_seed = 99;
  write_manifest(path.string(), c);
  EXPECT_EQ(load(path.string()), c);
  std::filesystem::remove(path);
}

TEST(ShippedConfigs, ParseAndDefaultsMatch) {
  const std::string dir = CMBRL_CONFIG_DIR;
  EXPECT_EQ(load(dir + "/default.ini"), ExperimentConfig{});
  EXPECT_NO_THROW(load(dir + "/desk.ini"));
  EXPECT_NO_THROW(load(dir + "/smoke.ini"));
}

}  // namespace
}  // namespace cmbrl::config
