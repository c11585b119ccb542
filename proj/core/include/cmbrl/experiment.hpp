#pragma once

// Experiment orchestration behind the `cmbrl` command-line tool.
//
// Output layout under the configured output directory:
//   manifest.ini              configuration copy, master seed, code version
//   metrics.csv               rows of every variant, in configured variant order
//   <variant>/metrics.csv     rows of one variant
//   <variant>/run.ckpt        resumable checkpoint of that variant

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cmbrl/config.hpp"
#include "cmbrl/dyna.hpp"

namespace cmbrl::experiment {

struct RunOptions {
  // Stop each variant once it has taken this many real steps; -1 runs to the end.
  std::int64_t halt_after_steps = -1;
  // Continue from <variant>/run.ckpt where one exists.
  bool resume = false;
  // One child process per variant.
  bool parallel = false;
  std::ostream* log = nullptr;
};

struct VariantOutcome {
  Variant variant = Variant::kMbrl;
  bool finished = false;
  bool diverged = false;
  std::int64_t total_steps = 0;
  std::string message;
};

struct RunOutcome {
  std::vector<VariantOutcome> variants;
  bool all_finished() const;
  bool any_diverged() const;
};

std::string variant_dir(const config::ExperimentConfig& config, Variant v);
std::string checkpoint_path(const config::ExperimentConfig& config, Variant v);
std::string metrics_path(const config::ExperimentConfig& config);

RunOutcome run_experiment(const config::ExperimentConfig& config, const RunOptions& options = {});

// Task the saved agent was trained for: the active task, or the last one
// completed when the run sits on a task boundary.
int agent_task_id(const dyna::RunState& state, const dyna::DynaConfig& config);

struct EvalSummary {
  int episodes = 0;
  int task_id = 1;
  double mean = 0.0;
  double stddev = 0.0;  // population
  std::vector<double> returns;
};

// Deterministic-policy rollouts of a run checkpoint's agent; reads the file only.
// `task_id` 0 selects agent_task_id().
EvalSummary evaluate_checkpoint(const std::string& path, envsim::Scenario scenario, int episodes,
                                std::uint64_t seed, int task_id = 0);

// Human-readable listing of a checkpoint's sections and run position.
void describe_checkpoint(const std::string& path, std::ostream& out);

}  // namespace cmbrl::experiment
