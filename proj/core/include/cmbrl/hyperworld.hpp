#pragma once

// Hypernetwork world model.
//
// One hypernetwork H generates, row by row, the parameters of two target
// networks: a dynamics net predicting the next zone temperature and a reward
// net. Each row of H's input is [task one-hot (3), layer one-hot (L), noise],
// where the layer index runs over the layers of both targets (dynamics layers
// first) and H's output head is as wide as the largest layer. The slice of a
// row that a layer needs is given by the chunk table.
//
// Target input layout (7 values, normalized):
//   0 zone temperature      (T - 20) / 10
//   1 dry-bulb forecast     (F - 20) / 10, F = first forecast step by default
//   2 cooling setpoint      (C - 20) / 10
//   3 heating setpoint      (H - 20) / 10
//   4..6 actions a1, a2, a3 in [0, 1]
// Outputs: dynamics predicts (T' - T) / delta_scale, reward predicts
// r / reward_scale.

#include <array>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "cmbrl/diffnet.hpp"
#include "cmbrl/envsim.hpp"
#include "cmbrl/rng.hpp"
#include "cmbrl/sac.hpp"

namespace cmbrl::hyperworld {

inline constexpr int kTargetInputDim = 7;
inline constexpr int kNumTasks = 3;

enum class TargetKind : std::uint8_t { kDynamics = 0, kReward = 1 };
enum class ForecastSummary : std::uint8_t { kFirst = 0, kMean = 1 };

struct Normalization {
  double temp_center = 20.0;
  double temp_scale = 10.0;
  double delta_scale = 0.5;
  double reward_scale = 1.0;
  ForecastSummary forecast = ForecastSummary::kFirst;
  bool operator==(const Normalization&) const = default;
};

struct TargetSpec {
  diffnet::NetSpec dynamics;
  diffnet::NetSpec reward;

  static TargetSpec make(const std::vector<int>& hidden);
  const diffnet::NetSpec& of(TargetKind kind) const {
    return kind == TargetKind::kDynamics ? dynamics : reward;
  }
  bool operator==(const TargetSpec&) const = default;
};

struct HyperworldConfig {
  std::vector<int> target_hidden{32, 32};
  std::vector<int> hypernet_hidden{128, 128};
  int noise_dim = 8;
  double noise_sigma = 0.1;
  Normalization norm;
};

struct ChunkEntry {
  TargetKind target;
  int layer;            // layer within its target
  int layer_id;         // row index presented to the hypernetwork
  std::size_t size;     // parameters taken from the front of the output row
  std::size_t offset;   // offset inside the target's ParamVector
  bool operator==(const ChunkEntry&) const = default;
};

struct HypernetState {
  TargetSpec targets;
  diffnet::NetSpec spec;
  diffnet::ParamVector params;
  diffnet::AdamState opt;
  std::vector<ChunkEntry> chunk_table;
  int noise_dim = 8;
  double noise_sigma = 0.1;
  Normalization norm;

  int num_layers() const { return static_cast<int>(chunk_table.size()); }
  int conditioning_dim() const { return kNumTasks + num_layers() + noise_dim; }
  int output_dim() const { return spec.output_dim(); }
  bool operator==(const HypernetState&) const = default;
};

HypernetState hypernet_init(const HyperworldConfig& config, std::uint64_t seed);

// [one_hot(task_id), one_hot(layer_id), noise]. Throws ContractViolation for
// out-of-range ids.
std::vector<double> encode_condition(int task_id, int layer_id, std::span<const double> noise,
                                     int num_layers);

// sigma * N(0, I) of length noise_dim.
std::vector<double> draw_noise(const HypernetState& hypernet, Rng& rng);

struct GeneratedTarget {
  TargetKind kind = TargetKind::kDynamics;
  int task_id = 1;
  std::vector<double> noise;
  diffnet::ParamVector params;
  bool operator==(const GeneratedTarget&) const = default;
};

GeneratedTarget generate_target(const HypernetState& hypernet, TargetKind kind, int task_id,
                                std::span<const double> noise);

// Normalized 7-value input row for a state/action pair.
std::array<double, kTargetInputDim> target_input(const envsim::Observation& obs,
                                                 const envsim::Setpoints& setpoints,
                                                 const envsim::ActionVector& actions,
                                                 const Normalization& norm);

// Raw (normalized) output of the generated network on one input row.
double target_predict(const GeneratedTarget& generated, const diffnet::NetSpec& spec,
                      std::span<const double> state_action);

// Maps a raw output back to physical units: next zone temperature in degC
// for dynamics, reward in K*h for the reward net. `state_action` is the
// normalized input the prediction was made from.
double denormalize(TargetKind kind, std::span<const double> state_action, double raw,
                   const Normalization& norm);

struct EnsembleStats {
  double mean = 0.0;
  double stddev = 0.0;
};

// n_models independent noise draws; statistics of the denormalized predictions.
EnsembleStats ensemble_predict(const HypernetState& hypernet, TargetKind kind, int task_id,
                               std::span<const double> state_action, int n_models, Rng& rng);

// Generated parameters of both targets for a set of noise draws, computed in a
// single batched hypernetwork pass.
struct Ensemble {
  int task_id = 1;
  std::vector<diffnet::ParamVector> dynamics;
  std::vector<diffnet::ParamVector> reward;
  int size() const { return static_cast<int>(dynamics.size()); }
};

Ensemble generate_ensemble(const HypernetState& hypernet, int task_id, int n_models, Rng& rng);

// Per-row mean and population standard deviation of denormalized predictions.
struct BatchStats {
  diffnet::Vec mean;
  diffnet::Vec stddev;
};
BatchStats ensemble_predict_batch(const HypernetState& hypernet, const Ensemble& ensemble,
                                  TargetKind kind, const diffnet::Mat& inputs);

struct TaskParams {
  diffnet::ParamVector dynamics;
  diffnet::ParamVector reward;
  bool operator==(const TaskParams&) const = default;
};

// Zero-noise generated parameters frozen at task boundaries, keyed by task id.
class RegularizationSnapshot {
 public:
  RegularizationSnapshot() = default;
  explicit RegularizationSnapshot(std::map<int, TaskParams> entries)
      : entries_(std::move(entries)) {}

  const std::map<int, TaskParams>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  bool contains(int task_id) const { return entries_.count(task_id) != 0; }
  const TaskParams& at(int task_id) const { return entries_.at(task_id); }
  std::vector<int> task_ids() const;

  bool operator==(const RegularizationSnapshot&) const = default;

 private:
  std::map<int, TaskParams> entries_;
};

// Zero-noise generation of both targets for a task.
TaskParams canonical_params(const HypernetState& hypernet, int task_id);

RegularizationSnapshot capture_snapshot(const HypernetState& hypernet,
                                        std::span<const int> completed_task_ids);

// Mean squared difference between the current canonical parameters for
// `task_id` (both targets, concatenated) and the snapshot entry.
double snapshot_distance(const HypernetState& hypernet, const RegularizationSnapshot& snapshot,
                         int task_id);

struct HypernetLosses {
  double mse_dynamics = 0.0;
  double mse_reward = 0.0;
  double regularization = 0.0;
  double total = 0.0;
};

struct TrainingBatch {
  diffnet::Mat inputs;          // B x 7
  diffnet::Mat next_temp;       // B x 1, normalized delta
  diffnet::Mat reward;          // B x 1, normalized reward
  static TrainingBatch from_transitions(std::span<const envsim::Transition> batch,
                                        const Normalization& norm);
};

// Loss (and, when `grad` is non-null, its exact gradient with respect to the
// hypernetwork parameters) for a fixed noise draw:
//   mse_dyn + mse_rew + beta * sum_k MSE(canonical_k, snapshot_k).
HypernetLosses hypernet_loss(const HypernetState& hypernet, const TrainingBatch& batch,
                             int task_id, std::span<const double> noise,
                             const RegularizationSnapshot& snapshot, double beta,
                             diffnet::ParamVector* grad);

// One fresh noise draw, one Adam step. Throws TrainingDivergence on a
// non-finite loss.
HypernetLosses hypernet_train_step(HypernetState& hypernet,
                                   std::span<const envsim::Transition> batch, int task_id,
                                   const RegularizationSnapshot& snapshot, double beta, double lr,
                                   Rng& rng);

// One-step model rollouts from sampled real transitions: the policy samples a
// stochastic action for each real observation, it is discretized and
// completed with task defaults, and the ensemble means give (s', r). The
// synthetic next observation keeps the real transition's exogenous features.
std::vector<envsim::Transition> synthetic_rollouts(const HypernetState& hypernet,
                                                   const Ensemble& ensemble,
                                                   const envsim::TaskSpec& task,
                                                   std::span<const envsim::Transition> real,
                                                   const sac::AgentState& agent,
                                                   const sac::ActionGrid& grid,
                                                   const sac::SacConfig& sac_config,
                                                   const envsim::EnvParams& env_params, Rng& rng);

envsim::Transition synthetic_rollout(const HypernetState& hypernet, const Ensemble& ensemble,
                                     const envsim::TaskSpec& task,
                                     const envsim::Transition& real, const sac::AgentState& agent,
                                     const sac::ActionGrid& grid,
                                     const sac::SacConfig& sac_config,
                                     const envsim::EnvParams& env_params, Rng& rng);

}  // namespace cmbrl::hyperworld
