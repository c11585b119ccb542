#pragma once

// Dyna-style continual training loop.
//
// For every task in the sequence the SAC agent starts from scratch while the
// hypernetwork world model persists. Each real environment step:
//   1. act with the stochastic policy (discretized, defaults filled in) and
//      store the transition in M_alpha and M_gamma;
//   2. [mbrl] once M_gamma holds warmup_transitions, take one hypernetwork
//      training step on a batch from M_gamma;
//   3. [mbrl] after warm-up, generate synthetic_per_step one-step rollouts
//      from real states in M_alpha into M_beta;
//   4. on gated steps, update SAC from a mixed M_alpha/M_beta batch.
// After each episode the deterministic policy is evaluated on every
// evaluation scenario; at each task end the zero-noise parameters of every
// finished task are regenerated from the current hypernetwork and frozen as
// the regularization snapshot for the tasks that follow.

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cmbrl/buffers.hpp"
#include "cmbrl/envsim.hpp"
#include "cmbrl/hyperworld.hpp"
#include "cmbrl/metrics.hpp"
#include "cmbrl/rng.hpp"
#include "cmbrl/sac.hpp"

namespace cmbrl::dyna {

struct DynaConfig {
  envsim::EnvParams env;
  sac::SacConfig sac;
  sac::ActionGrid grid;
  hyperworld::HyperworldConfig world;

  std::size_t batch_size = 1024;
  std::size_t real_capacity = 35000;
  std::size_t synthetic_capacity = 35000;
  std::size_t hypernet_capacity = 4000;
  double hypernet_lr = 0.0001;
  double beta = 0.1;
  int synthetic_per_step = 10;
  int ensemble_size = 100;
  int policy_update_every = 2;
  double real_fraction = 0.5;
  std::size_t warmup_transitions = 1024;
  // M_gamma is initialized once for the whole sequence, not per task.
  bool carry_hypernet_buffer = true;

  std::vector<int> task_sequence{1, 2, 3};
  std::array<int, 3> episodes_per_task{30, 30, 5};  // indexed by task_id - 1
  envsim::Scenario train_scenario = envsim::Scenario::kJanuaryLike;
  std::vector<envsim::Scenario> eval_scenarios{envsim::Scenario::kJanuaryLike,
                                               envsim::Scenario::kAprilLike};
  bool record_wall_clock = false;

  int episodes_for(int task_id) const { return episodes_per_task.at(task_id - 1); }
  void validate() const;
};

struct StageReport {
  int task_id = 1;
  Variant variant = Variant::kMbrl;
  std::uint64_t seed = 0;
  std::vector<double> eval_returns;   // first evaluation scenario, one per episode
  std::vector<double> train_returns;
  std::vector<hyperworld::HypernetLosses> hypernet_losses;  // per-episode means
  std::vector<std::int64_t> synthetic_per_episode;
  std::int64_t real_transitions = 0;
  std::int64_t synthetic_transitions = 0;
  double wall_time_s = 0.0;
  bool diverged = false;
  std::int64_t failure_step = -1;
  std::string failure;
};

// Seed of the (variant, task) stage; derived streams hang off it.
std::uint64_t stage_seed(std::uint64_t master_seed, Variant variant, int task_id);
std::uint64_t hypernet_seed(std::uint64_t master_seed);
std::uint64_t eval_seed(std::uint64_t master_seed, envsim::Scenario scenario);

// Deterministic-mode returns of `agent` over `episodes` episodes; episode e
// uses derive_seed(seed, "episode", e) for the weather.
std::vector<double> evaluate_policy(const envsim::ThermalZone& zone, const sac::AgentState& agent,
                                    const envsim::TaskSpec& task, envsim::Scenario scenario,
                                    std::uint64_t seed, int episodes,
                                    const sac::ActionGrid& grid, const sac::SacConfig& sac_config);

// Everything needed to resume a run bit-exactly.
struct RunState {
  Variant variant = Variant::kMbrl;
  std::uint64_t master_seed = 0;
  std::int64_t total_steps = 0;

  int task_index = 0;       // position in task_sequence
  bool task_active = false;
  int episode = 0;          // within the task
  bool episode_active = false;
  std::int64_t task_step = 0;

  envsim::EnvState env;
  envsim::Observation obs;
  sac::AgentState agent;
  bool has_hypernet = false;
  hyperworld::HypernetState hypernet;
  hyperworld::RegularizationSnapshot snapshot;
  std::vector<int> completed_tasks;
  BufferSet buffers;

  Rng action_rng;
  Rng model_rng;
  Rng sac_rng;

  // Current-episode accumulators.
  double episode_return = 0.0;
  hyperworld::HypernetLosses loss_sum;
  std::int64_t loss_count = 0;
  std::int64_t episode_synthetic = 0;

  std::vector<MetricsRow> metrics;
  std::vector<StageReport> reports;
  bool finished = false;
  bool failed = false;
};

class ContinualRun {
 public:
  ContinualRun(DynaConfig config, Variant variant, std::uint64_t master_seed,
               std::optional<envsim::WeatherTable> weather = std::nullopt);
  // Resumes from a saved state; config must match the one that produced it.
  ContinualRun(DynaConfig config, RunState state,
               std::optional<envsim::WeatherTable> weather = std::nullopt);

  // One real environment step plus everything attached to it, including any
  // episode or task boundary it completes. No-op once finished.
  void step();
  // Steps until finished, or until `max_steps` steps were taken in this call.
  void run(std::int64_t max_steps = -1);
  // Runs the current (or next) task to its end and returns its report.
  // Propagates TrainingDivergence after recording the partial report.
  StageReport run_task();

  bool finished() const { return state_.finished; }
  bool failed() const { return state_.failed; }
  const RunState& state() const { return state_; }
  const DynaConfig& config() const { return config_; }
  const std::vector<MetricsRow>& metrics() const { return state_.metrics; }
  const std::vector<StageReport>& reports() const { return state_.reports; }
  int current_task_id() const;

 private:
  void begin_task();
  void begin_episode();
  void env_step();
  void end_episode();
  void end_task();

  DynaConfig config_;
  envsim::ThermalZone zone_;
  RunState state_;
  double stage_started_s_ = 0.0;
};

// The whole 1 -> 2 -> 3 sequence for one variant.
std::vector<StageReport> run_continual(const DynaConfig& config, Variant variant,
                                       std::uint64_t master_seed);

}  // namespace cmbrl::dyna
