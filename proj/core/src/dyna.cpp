#include "cmbrl/dyna.hpp"

#include <algorithm>
#include <chrono>
#include <string>

#include "cmbrl/errors.hpp"

namespace cmbrl::dyna {
namespace {

double now_s() {
  using clock = std::chrono::steady_clock;
  return std::chrono::duration<double>(clock::now().time_since_epoch()).count();
}

}  // namespace

void DynaConfig::validate() const {
  if (task_sequence.empty()) throw ContractViolation("task sequence is empty");
  for (int id : task_sequence) {
    if (id < 1 || id > 3) throw ContractViolation("task ids must be 1, 2 or 3");
    if (episodes_for(id) < 0) throw ContractViolation("episode budgets must be >= 0");
  }
  if (batch_size == 0) throw ContractViolation("batch_size must be >= 1");
  if (synthetic_per_step < 0) throw ContractViolation("synthetic_per_step must be >= 0");
  if (ensemble_size < 1) throw ContractViolation("ensemble_size must be >= 1");
  if (policy_update_every < 1) throw ContractViolation("policy_update_every must be >= 1");
  if (real_fraction < 0.0 || real_fraction > 1.0) {
    throw ContractViolation("real_fraction must lie in [0, 1]");
  }
  if (eval_scenarios.empty()) throw ContractViolation("need at least one evaluation scenario");
  grid.validate();
}

std::uint64_t stage_seed(std::uint64_t master_seed, Variant variant, int task_id) {
  return derive_seed(master_seed, to_string(variant), static_cast<std::uint64_t>(task_id));
}

std::uint64_t hypernet_seed(std::uint64_t master_seed) {
  return derive_seed(master_seed, "hypernet");
}

std::uint64_t eval_seed(std::uint64_t master_seed, envsim::Scenario scenario) {
  return derive_seed(master_seed, "eval", static_cast<std::uint64_t>(scenario));
}

std::vector<double> evaluate_policy(const envsim::ThermalZone& zone, const sac::AgentState& agent,
                                    const envsim::TaskSpec& task, envsim::Scenario scenario,
                                    std::uint64_t seed, int episodes,
                                    const sac::ActionGrid& grid,
                                    const sac::SacConfig& sac_config) {
  std::vector<double> returns;
  Rng unused(0);
  for (int e = 0; e < episodes; ++e) {
    envsim::EnvState env = zone.reset(task, scenario, derive_seed(seed, "episode", e));
    envsim::Observation obs = zone.observe(env);
    double total = 0.0;
    for (int k = 0; k < zone.params().steps_per_episode; ++k) {
      const auto f = obs.features();
      const auto a = sac::select_action(agent, f, sac::ActionMode::kDeterministic, unused,
                                        sac_config);
      const auto full = envsim::apply_defaults(task, sac::discretize(a, grid), zone.params());
      const auto r = zone.step(env, full);
      total += r.reward;
      obs = r.obs;
    }
    returns.push_back(total);
  }
  return returns;
}

ContinualRun::ContinualRun(DynaConfig config, Variant variant, std::uint64_t master_seed,
                           std::optional<envsim::WeatherTable> weather)
    : config_(std::move(config)), zone_(config_.env, std::move(weather)) {
  config_.validate();
  state_.variant = variant;
  state_.master_seed = master_seed;
  state_.buffers = BufferSet(config_.real_capacity, config_.synthetic_capacity,
                             config_.hypernet_capacity);
  if (variant == Variant::kMbrl) {
    state_.has_hypernet = true;
    state_.hypernet = hyperworld::hypernet_init(config_.world, hypernet_seed(master_seed));
  }
}

ContinualRun::ContinualRun(DynaConfig config, RunState state,
                           std::optional<envsim::WeatherTable> weather)
    : config_(std::move(config)), zone_(config_.env, std::move(weather)), state_(std::move(state)) {
  config_.validate();
  stage_started_s_ = now_s();
}

int ContinualRun::current_task_id() const {
  const auto idx = static_cast<std::size_t>(
      std::min<int>(state_.task_index, static_cast<int>(config_.task_sequence.size()) - 1));
  return config_.task_sequence[idx];
}

void ContinualRun::begin_task() {
  const int task_id = current_task_id();
  const std::uint64_t seed = stage_seed(state_.master_seed, state_.variant, task_id);
  state_.agent = sac::sac_init(envsim::kObservationDim, envsim::TaskSpec::make(task_id).action_dim(),
                               derive_seed(seed, "agent"), config_.sac);
  state_.action_rng = Rng(derive_seed(seed, "action"));
  state_.model_rng = Rng(derive_seed(seed, "model"));
  state_.sac_rng = Rng(derive_seed(seed, "sac"));
  state_.buffers.m_alpha.clear();
  state_.buffers.m_beta.clear();
  if (!config_.carry_hypernet_buffer) state_.buffers.m_gamma.clear();
  state_.episode = 0;
  state_.task_step = 0;
  state_.task_active = true;
  StageReport report;
  report.task_id = task_id;
  report.variant = state_.variant;
  report.seed = seed;
  state_.reports.push_back(report);
  stage_started_s_ = now_s();
}

void ContinualRun::begin_episode() {
  const int task_id = current_task_id();
  const std::uint64_t seed = stage_seed(state_.master_seed, state_.variant, task_id);
  state_.env = zone_.reset(envsim::TaskSpec::make(task_id), config_.train_scenario,
                           derive_seed(seed, "env", static_cast<std::uint64_t>(state_.episode)));
  state_.obs = zone_.observe(state_.env);
  state_.episode_return = 0.0;
  state_.loss_sum = {};
  state_.loss_count = 0;
  state_.episode_synthetic = 0;
  state_.episode_active = true;
}

void ContinualRun::env_step() {
  const int task_id = current_task_id();
  const envsim::TaskSpec task = envsim::TaskSpec::make(task_id);
  const bool model_based = state_.variant == Variant::kMbrl;
  BufferSet& buf = state_.buffers;

  // 1. Real interaction.
  const auto features = state_.obs.features();
  const auto cont = sac::select_action(state_.agent, features, sac::ActionMode::kStochastic,
                                       state_.action_rng, config_.sac);
  const auto snapped = sac::discretize(cont, config_.grid);
  envsim::Transition tr;
  tr.obs = state_.obs;
  tr.actions = envsim::apply_defaults(task, snapped, config_.env);
  tr.policy_dim = task.action_dim();
  std::copy(cont.begin(), cont.end(), tr.policy_action.begin());
  const envsim::StepResult result = zone_.step(state_.env, tr.actions);
  tr.next_obs = result.obs;
  tr.reward = result.reward;
  tr.setpoints = result.setpoints;
  tr.task_id = task_id;
  buf.m_alpha.push(tr);
  buf.m_gamma.push(tr);
  state_.obs = result.obs;
  state_.episode_return += result.reward;
  state_.reports.back().real_transitions += 1;

  const bool warm = buf.m_gamma.size() >= config_.warmup_transitions;
  if (model_based && warm) {
    // 2. World-model update.
    const auto batch = buf.m_gamma.sample(std::min(config_.batch_size, buf.m_gamma.size()),
                                          state_.model_rng);
    const auto losses =
        hyperworld::hypernet_train_step(state_.hypernet, batch, task_id, state_.snapshot,
                                        config_.beta, config_.hypernet_lr, state_.model_rng);
    state_.loss_sum.mse_dynamics += losses.mse_dynamics;
    state_.loss_sum.mse_reward += losses.mse_reward;
    state_.loss_sum.regularization += losses.regularization;
    state_.loss_sum.total += losses.total;
    state_.loss_count += 1;

    // 3. One-step synthetic rollouts.
    if (config_.synthetic_per_step > 0) {
      const auto n = std::min<std::size_t>(config_.synthetic_per_step, buf.m_alpha.size());
      const auto ensemble = hyperworld::generate_ensemble(state_.hypernet, task_id,
                                                          config_.ensemble_size, state_.model_rng);
      const auto starts = buf.m_alpha.sample(n, state_.model_rng);
      const auto synthetic = hyperworld::synthetic_rollouts(
          state_.hypernet, ensemble, task, starts, state_.agent, config_.grid, config_.sac,
          config_.env, state_.model_rng);
      for (const auto& s : synthetic) buf.m_beta.push(s);
      state_.episode_synthetic += static_cast<std::int64_t>(synthetic.size());
      state_.reports.back().synthetic_transitions += static_cast<std::int64_t>(synthetic.size());
    }
  }

  // 4. Policy update.
  if (sac::policy_update_gate(state_.task_step, config_.policy_update_every)) {
    const double fraction = model_based ? config_.real_fraction : 1.0;
    const auto batch = mixed_batch(buf, config_.batch_size, fraction, state_.sac_rng);
    if (batch) sac::sac_update(state_.agent, *batch, config_.sac, state_.sac_rng);
  }

  state_.task_step += 1;
  state_.total_steps += 1;
}

void ContinualRun::end_episode() {
  const int task_id = current_task_id();
  const envsim::TaskSpec task = envsim::TaskSpec::make(task_id);
  StageReport& report = state_.reports.back();
  hyperworld::HypernetLosses mean{};
  if (state_.loss_count > 0) {
    const auto c = static_cast<double>(state_.loss_count);
    mean = {state_.loss_sum.mse_dynamics / c, state_.loss_sum.mse_reward / c,
            state_.loss_sum.regularization / c, state_.loss_sum.total / c};
  }
  for (std::size_t i = 0; i < config_.eval_scenarios.size(); ++i) {
    const envsim::Scenario scenario = config_.eval_scenarios[i];
    const double ret =
        evaluate_policy(zone_, state_.agent, task, scenario,
                        eval_seed(state_.master_seed, scenario), 1, config_.grid, config_.sac)
            .front();
    MetricsRow row;
    row.variant = state_.variant;
    row.task_id = task_id;
    row.episode = state_.episode;
    row.step = state_.task_step;
    row.scenario = scenario;
    row.episodic_return = ret;
    row.train_return = state_.episode_return;
    row.hypernet_mse_dynamics = mean.mse_dynamics;
    row.hypernet_mse_reward = mean.mse_reward;
    row.hypernet_regularization = mean.regularization;
    row.wall_clock_s = config_.record_wall_clock ? now_s() - stage_started_s_ : 0.0;
    state_.metrics.push_back(row);
    if (i == 0) report.eval_returns.push_back(ret);
  }
  report.train_returns.push_back(state_.episode_return);
  report.hypernet_losses.push_back(mean);
  report.synthetic_per_episode.push_back(state_.episode_synthetic);
  state_.episode += 1;
  state_.episode_active = false;
}

void ContinualRun::end_task() {
  const int task_id = current_task_id();
  if (state_.has_hypernet) {
    if (std::find(state_.completed_tasks.begin(), state_.completed_tasks.end(), task_id) ==
        state_.completed_tasks.end()) {
      state_.completed_tasks.push_back(task_id);
    }
    state_.snapshot = hyperworld::capture_snapshot(state_.hypernet, state_.completed_tasks);
  }
  state_.reports.back().wall_time_s += now_s() - stage_started_s_;
  state_.task_active = false;
  state_.task_index += 1;
  if (state_.task_index >= static_cast<int>(config_.task_sequence.size())) state_.finished = true;
}

void ContinualRun::step() {
  while (!state_.finished) {
    if (!state_.task_active) begin_task();
    if (state_.episode >= config_.episodes_for(current_task_id())) {
      end_task();
      continue;
    }
    if (!state_.episode_active) begin_episode();
    try {
      env_step();
    } catch (const TrainingDivergence& e) {
      StageReport& report = state_.reports.back();
      report.diverged = true;
      report.failure_step = state_.task_step;
      report.failure = e.what();
      state_.failed = true;
      state_.finished = true;
      throw TrainingDivergence(std::string(e.what()) + " at step " +
                                   std::to_string(state_.task_step),
                               state_.task_step);
    }
    if (state_.env.step_index >= config_.env.steps_per_episode) {
      end_episode();
      if (state_.episode >= config_.episodes_for(current_task_id())) end_task();
    }
    return;
  }
}

void ContinualRun::run(std::int64_t max_steps) {
  std::int64_t taken = 0;
  while (!state_.finished && (max_steps < 0 || taken < max_steps)) {
    step();
    ++taken;
  }
}

StageReport ContinualRun::run_task() {
  if (state_.finished) throw ContractViolation("run already finished");
  const int start_index = state_.task_index;
  while (!state_.finished && state_.task_index == start_index) step();
  return state_.reports.back();
}

std::vector<StageReport> run_continual(const DynaConfig& config, Variant variant,
                                       std::uint64_t master_seed) {
  ContinualRun run(config, variant, master_seed);
  run.run();
  return run.reports();
}

}  // namespace cmbrl::dyna
