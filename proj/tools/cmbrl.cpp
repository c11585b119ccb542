// cmbrl: run continual MBRL/MFRL experiments, evaluate checkpoints, plot
// learning curves, and inspect checkpoint files.
//
// Exit status: 0 success, 1 unexpected failure, 2 bad configuration or
// arguments, 3 training diverged, 4 checkpoint could not be loaded,
// 5 invalid metrics file.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "cmbrl/config.hpp"
#include "cmbrl/errors.hpp"
#include "cmbrl/experiment.hpp"
#include "cmbrl/metrics.hpp"
#include "cmbrl/plot.hpp"

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;
constexpr int kExitCheckpoint = 4;
constexpr int kExitMetrics = 5;

int cmd_run(const std::string& config_path, std::int64_t halt_after, bool resume, bool parallel,
            bool quiet) {
  if (!std::filesystem::exists(config_path)) {
    std::cerr << "error: config file not found: " << config_path << "\n";
    return kExitConfig;
  }
  cmbrl::config::ExperimentConfig config;
  try {
    config = cmbrl::config::load(config_path);
  } catch (const cmbrl::ConfigError& e) {
    std::cerr << "error: " << config_path << ": " << e.what() << "\n";
    return kExitConfig;
  }
  if (const char* dir = std::getenv("CMBRL_OUTPUT_DIR"); dir != nullptr && *dir != '\0') {
    config.output_dir = dir;
  }

  cmbrl::experiment::RunOptions options;
  options.halt_after_steps = halt_after;
  options.resume = resume;
  options.parallel = parallel;
  options.log = quiet ? nullptr : &std::cerr;
  const auto outcome = cmbrl::experiment::run_experiment(config, options);
  std::cout << "metrics: " << cmbrl::experiment::metrics_path(config) << "\n";
  return outcome.any_diverged() ? kExitDiverged : 0;
}

int cmd_evaluate(const std::string& ckpt, const std::string& scenario_name, int episodes,
                 std::uint64_t seed, int task) {
  const auto scenario = cmbrl::envsim::scenario_from_string(scenario_name);
  const auto s = cmbrl::experiment::evaluate_checkpoint(ckpt, scenario, episodes, seed, task);
  std::printf("task %d, %s, %d episodes\n", s.task_id, scenario_name.c_str(), s.episodes);
  if (s.episodes == 0) {
    std::printf("no episodes evaluated\n");
    return 0;
  }
  for (std::size_t i = 0; i < s.returns.size(); ++i) {
    std::printf("episode %zu: %.6f\n", i, s.returns[i]);
  }
  std::printf("mean %.6f K*h, stddev %.6f K*h\n", s.mean, s.stddev);
  return 0;
}

int cmd_plot(const std::string& metrics, const std::string& out_dir) {
  const auto rows = cmbrl::read_metrics_file(metrics);
  for (const auto& p : cmbrl::plot::write_learning_curves(rows, out_dir)) std::cout << p << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Continual model-based RL experiments on a thermal zone surrogate"};
  app.set_version_flag("--version", cmbrl::config::code_version());
  app.require_subcommand(1);

  std::string config_path;
  std::int64_t halt_after = -1;
  bool resume = false;
  bool parallel = false;
  bool quiet = false;
  auto* run = app.add_subcommand("run", "Run every configured variant over the task sequence");
  run->add_option("config", config_path, "Experiment configuration file")->required();
  run->add_option("--halt-after-steps", halt_after,
                  "Stop each variant after this many real steps and checkpoint it");
  run->add_flag("--resume", resume, "Continue from existing checkpoints in the output directory");
  run->add_flag("--parallel", parallel, "Run variants in separate processes");
  run->add_flag("-q,--quiet", quiet, "No progress output");

  std::string ckpt;
  std::string scenario = "january_like";
  int episodes = 1;
  std::uint64_t seed = 0;
  int task = 0;
  auto* eval = app.add_subcommand("evaluate", "Deterministic rollouts of a checkpoint's policy");
  eval->add_option("checkpoint", ckpt, "Run checkpoint")->required();
  eval->add_option("--scenario", scenario, "january_like or april_like");
  eval->add_option("--episodes", episodes, "Number of evaluation episodes")
      ->check(CLI::NonNegativeNumber);
  eval->add_option("--seed", seed, "Weather seed");
  eval->add_option("--task", task, "Task id (default: the task the agent was trained on)")
      ->check(CLI::Range(0, 3));

  std::string metrics;
  std::string out_dir;
  auto* plot = app.add_subcommand("plot", "Write SVG learning curves from a metrics file");
  plot->add_option("metrics", metrics, "Metrics CSV")->required();
  plot->add_option("output", out_dir, "Output directory")->required();

  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect-checkpoint", "List a checkpoint's contents");
  inspect->add_option("checkpoint", inspect_path, "Checkpoint file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  for (const std::string* path : {&ckpt, &inspect_path}) {
    if (!path->empty() && !std::filesystem::exists(*path)) {
      std::cerr << "error: checkpoint not found: " << *path << "\n";
      return kExitCheckpoint;
    }
  }

  try {
    if (*run) return cmd_run(config_path, halt_after, resume, parallel, quiet);
    if (*eval) return cmd_evaluate(ckpt, scenario, episodes, seed, task);
    if (*plot) return cmd_plot(metrics, out_dir);
    if (*inspect) {
      cmbrl::experiment::describe_checkpoint(inspect_path, std::cout);
      return 0;
    }
  } catch (const cmbrl::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const cmbrl::CorruptCheckpoint& e) {
    std::cerr << "error: corrupt checkpoint: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const cmbrl::CheckpointVersionError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitCheckpoint;
  } catch (const cmbrl::ContractViolation& e) {
    std::cerr << "error: " << e.what() << "\n";
    return *plot ? kExitMetrics : kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
