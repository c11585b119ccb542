#include <benchmark/benchmark.h>

#include <vector>

#include "cmbrl/envsim.hpp"
#include "cmbrl/hyperworld.hpp"
#include "cmbrl/sac.hpp"

namespace {

using namespace cmbrl;

std::vector<envsim::Transition> random_transitions(int n, int policy_dim, std::uint64_t seed) {
  envsim::ThermalZone zone;
  const auto task = envsim::TaskSpec::make(policy_dim == 3 ? 2 : 1);
  auto state = zone.reset(task, envsim::Scenario::kJanuaryLike, seed);
  auto obs = zone.observe(state);
  Rng rng(seed);
  std::vector<envsim::Transition> out;
  for (int i = 0; i < n; ++i) {
    if (state.step_index == zone.params().steps_per_episode) {
      state = zone.reset(task, envsim::Scenario::kJanuaryLike, seed + i);
      obs = zone.observe(state);
    }
    envsim::Transition t;
    t.obs = obs;
    t.policy_dim = policy_dim;
    std::vector<double> a(policy_dim);
    for (int j = 0; j < policy_dim; ++j) a[j] = t.policy_action[j] = rng.uniform();
    t.actions = envsim::apply_defaults(task, a);
    const auto r = zone.step(state, t.actions);
    t.next_obs = r.obs;
    t.reward = r.reward;
    t.setpoints = r.setpoints;
    t.task_id = task.task_id;
    out.push_back(t);
    obs = r.obs;
  }
  return out;
}

void BM_SacUpdate(benchmark::State& state) {
  const int batch = static_cast<int>(state.range(0));
  const int hidden = static_cast<int>(state.range(1));
  sac::SacConfig cfg;
  cfg.actor_hidden = cfg.critic_hidden = {hidden, hidden};
  auto agent = sac::sac_init(envsim::kObservationDim, 1, 1, cfg);
  const auto data = random_transitions(batch, 1, 2);
  Rng rng(3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sac::sac_update(agent, data, cfg, rng));
  }
}
BENCHMARK(BM_SacUpdate)->Args({1024, 64})->Args({1024, 32})->Unit(benchmark::kMillisecond);

void BM_HypernetTrainStep(benchmark::State& state) {
  hyperworld::HyperworldConfig cfg;
  cfg.target_hidden = {static_cast<int>(state.range(1)), static_cast<int>(state.range(1))};
  cfg.hypernet_hidden = {static_cast<int>(state.range(2)), static_cast<int>(state.range(2))};
  auto h = hyperworld::hypernet_init(cfg, 1);
  const std::vector<int> done{1};
  const auto snap = hyperworld::capture_snapshot(h, done);
  const auto data = random_transitions(static_cast<int>(state.range(0)), 3, 4);
  Rng rng(5);
  for (auto _ : state) {
    benchmark::DoNotOptimize(hyperworld::hypernet_train_step(h, data, 2, snap, 0.1, 1e-4, rng));
  }
}
BENCHMARK(BM_HypernetTrainStep)
    ->Args({1024, 32, 128})
    ->Args({1024, 16, 64})
    ->Unit(benchmark::kMillisecond);

void BM_GenerateEnsemble(benchmark::State& state) {
  hyperworld::HyperworldConfig cfg;
  cfg.target_hidden = {static_cast<int>(state.range(1)), static_cast<int>(state.range(1))};
  cfg.hypernet_hidden = {static_cast<int>(state.range(2)), static_cast<int>(state.range(2))};
  const auto h = hyperworld::hypernet_init(cfg, 1);
  Rng rng(6);
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        hyperworld::generate_ensemble(h, 1, static_cast<int>(state.range(0)), rng));
  }
}
BENCHMARK(BM_GenerateEnsemble)
    ->Args({100, 32, 128})
    ->Args({100, 16, 64})
    ->Unit(benchmark::kMillisecond);

void BM_SyntheticRollouts(benchmark::State& state) {
  hyperworld::HyperworldConfig cfg;
  const auto h = hyperworld::hypernet_init(cfg, 1);
  Rng rng(7);
  const auto ensemble = hyperworld::generate_ensemble(h, 1, 100, rng);
  const auto agent = sac::sac_init(envsim::kObservationDim, 1, 1);
  const auto real = random_transitions(10, 1, 8);
  const auto task = envsim::TaskSpec::make(1);
  for (auto _ : state) {
    benchmark::DoNotOptimize(hyperworld::synthetic_rollouts(h, ensemble, task, real, agent, {},
                                                            {}, {}, rng));
  }
}
BENCHMARK(BM_SyntheticRollouts)->Unit(benchmark::kMillisecond);

void BM_EnvEpisode(benchmark::State& state) {
  envsim::ThermalZone zone;
  const auto task = envsim::TaskSpec::make(1);
  for (auto _ : state) {
    auto s = zone.reset(task, envsim::Scenario::kJanuaryLike, 1);
    double total = 0.0;
    for (int k = 0; k < zone.params().steps_per_episode; ++k) {
      total += zone.step(s, {0.5, 1.0, 1.0}).reward;
    }
    benchmark::DoNotOptimize(total);
  }
}
BENCHMARK(BM_EnvEpisode)->Unit(benchmark::kMillisecond);

}  // namespace
BENCHMARK_MAIN();
