#pragma once

// Soft actor-critic with twin critics, tanh-squashed Gaussian policy and
// automatic entropy tuning. Actions leave the agent in [0, 1]; the critic sees
// them affinely mapped back to [-1, 1].

#include <cstdint>
#include <span>
#include <vector>

#include "cmbrl/diffnet.hpp"
#include "cmbrl/envsim.hpp"
#include "cmbrl/rng.hpp"

namespace cmbrl::sac {

struct ActionGrid {
  std::vector<double> levels{0.0, 0.25, 0.5, 0.75, 1.0};
  void validate() const;
};

// Nearest grid level per component; exact midpoints go to the lower level.
double discretize(double value, const ActionGrid& grid);
std::vector<double> discretize(std::span<const double> action, const ActionGrid& grid);

struct SacConfig {
  std::vector<int> actor_hidden{64, 64};
  std::vector<int> critic_hidden{64, 64};
  double gamma = 0.99;
  double tau = 0.005;
  double lr_actor = 0.00005;
  double lr_critic = 0.0002;
  double lr_entropy = 0.0002;
  double initial_entropy_coeff = 0.1;
  double reward_scale = 1.0;
  double log_std_min = -5.0;
  double log_std_max = 2.0;
};

struct AgentState {
  int obs_dim = 0;
  int action_dim = 0;
  diffnet::NetSpec actor_spec;
  diffnet::NetSpec critic_spec;
  diffnet::ParamVector actor;
  diffnet::ParamVector critic1;
  diffnet::ParamVector critic2;
  diffnet::ParamVector target_critic1;
  diffnet::ParamVector target_critic2;
  double log_entropy_coeff = 0.0;
  double target_entropy = -1.0;
  diffnet::AdamState actor_opt;
  diffnet::AdamState critic1_opt;
  diffnet::AdamState critic2_opt;
  diffnet::AdamState entropy_opt;
  std::int64_t update_count = 0;

  double entropy_coeff() const;
  bool operator==(const AgentState&) const = default;
};

// Actor head has 2 * action_dim outputs: means then raw log-stds.
AgentState sac_init(int obs_dim, int action_dim, std::uint64_t seed, const SacConfig& config = {});

enum class ActionMode : std::uint8_t { kStochastic, kDeterministic };

// Returns an action in [0, 1]^action_dim. `obs` is Observation::features().
std::vector<double> select_action(const AgentState& agent, std::span<const double> obs,
                                  ActionMode mode, Rng& rng, const SacConfig& config = {});

// Batched form used by rollouts: one row of `obs` per sample.
diffnet::Mat select_actions(const AgentState& agent, const diffnet::Mat& obs, ActionMode mode,
                            Rng& rng, const SacConfig& config = {});

struct SacBatch {
  diffnet::Mat obs;         // B x obs_dim
  diffnet::Mat actions;     // B x action_dim, in [0, 1]
  diffnet::Vec rewards;     // B
  diffnet::Mat next_obs;    // B x obs_dim
  diffnet::Vec not_done;    // B, 0 for terminal transitions

  static SacBatch from_transitions(std::span<const envsim::Transition> batch, int action_dim);
};

struct SacLosses {
  double critic1 = 0.0;
  double critic2 = 0.0;
  double actor = 0.0;
  double entropy_coeff = 0.0;
};

// Soft Bellman targets r + gamma * not_done * (min target Q(s', a') - alpha log pi(a'|s')).
diffnet::Vec td_targets(const AgentState& agent, const SacBatch& batch, Rng& rng,
                        const SacConfig& config);

// Reparameterized actor objective mean(alpha * log pi(a|s) - min(Q1, Q2)(s, a))
// for fixed standard-normal draws `eps` (B x action_dim). When `grad` is
// non-null it receives the exact gradient with respect to the actor parameters;
// `log_prob`, when non-null, receives log pi per row.
double actor_objective(const AgentState& agent, const diffnet::Mat& obs, const diffnet::Mat& eps,
                       const SacConfig& config, diffnet::ParamVector* grad,
                       diffnet::Vec* log_prob = nullptr);

// One full SAC step: both critics, actor, entropy coefficient, then Polyak
// averaging of the target critics. Throws TrainingDivergence on a non-finite loss.
SacLosses sac_update(AgentState& agent, std::span<const envsim::Transition> batch,
                     const SacConfig& config, Rng& rng);

// Policy updates run on every `every`-th environment step, starting at step 0.
inline bool policy_update_gate(std::int64_t step_index, int every = 2) {
  return step_index % every == 0;
}

}  // namespace cmbrl::sac
