#include <gtest/gtest.h>

#include "cmbrl/dyna.hpp"
#include "cmbrl/errors.hpp"

namespace cmbrl::dyna {
namespace {

DynaConfig tiny_config() {
  DynaConfig c;
  c.env.steps_per_episode = 96;
  c.sac.actor_hidden = {16};
  c.sac.critic_hidden = {16};
  c.world.target_hidden = {8};
  c.world.hypernet_hidden = {16};
  c.batch_size = 32;
  c.warmup_transitions = 32;
  c.ensemble_size = 4;
  c.episodes_per_task = {2, 2, 1};
  return c;
}

TEST(DynaConfig, Validation) {
  EXPECT_NO_THROW(DynaConfig{}.validate());
  auto c = tiny_config();
  c.task_sequence = {};
  EXPECT_THROW(c.validate(), ContractViolation);
  c = tiny_config();
  c.task_sequence = {1, 4};
  EXPECT_THROW(c.validate(), ContractViolation);
  c = tiny_config();
  c.real_fraction = 1.5;
  EXPECT_THROW(c.validate(), ContractViolation);
  c = tiny_config();
  c.eval_scenarios.clear();
  EXPECT_THROW(c.validate(), ContractViolation);
}

TEST(ContinualRun, FullLengthEpisodeTransitionCounts) {
  auto c = tiny_config();
  c.env.steps_per_episode = 1344;
  c.task_sequence = {1};
  c.episodes_per_task = {1, 0, 0};
  c.warmup_transitions = 0;
  ContinualRun run(c, Variant::kMbrl, 1);
  const auto report = run.run_task();
  EXPECT_EQ(report.real_transitions, 1344);
  // Rollout starts come from M_alpha, which holds fewer than 10 states on the
  // first 9 steps of a task.
  EXPECT_EQ(report.synthetic_transitions, 1344 * 10 - 45);
  EXPECT_EQ(run.state().buffers.m_alpha.size(), 1344u);
  EXPECT_EQ(run.state().buffers.m_beta.size(), static_cast<std::size_t>(1344 * 10 - 45));
  EXPECT_EQ(run.state().buffers.m_gamma.size(), 1344u);
  EXPECT_TRUE(run.finished());
}

TEST(ContinualRun, WarmupDelaysModelUse) {
  auto c = tiny_config();
  c.task_sequence = {1};
  c.episodes_per_task = {1, 0, 0};
  ContinualRun run(c, Variant::kMbrl, 2);
  const auto report = run.run_task();
  EXPECT_EQ(report.synthetic_transitions, 10 * (96 - 32 + 1));
  ASSERT_EQ(report.synthetic_per_episode.size(), 1u);
  EXPECT_EQ(report.synthetic_per_episode[0], report.synthetic_transitions);
  EXPECT_GT(report.hypernet_losses[0].mse_dynamics, 0.0);
}

TEST(ContinualRun, ModelFreeNeverTouchesTheModel) {
  ContinualRun run(tiny_config(), Variant::kMfrl, 3);
  run.run();
  EXPECT_TRUE(run.finished());
  EXPECT_FALSE(run.state().has_hypernet);
  EXPECT_TRUE(run.state().buffers.m_beta.empty());
  for (const auto& r : run.reports()) EXPECT_EQ(r.synthetic_transitions, 0);
  for (const auto& row : run.metrics()) {
    EXPECT_EQ(row.hypernet_mse_dynamics, 0.0);
    EXPECT_EQ(row.hypernet_regularization, 0.0);
  }
}

TEST(ContinualRun, ModelFreeIgnoresHypernetSettings) {
  auto a = tiny_config();
  auto b = tiny_config();
  b.world.hypernet_hidden = {64, 64};
  b.world.noise_sigma = 0.7;
  b.beta = 5.0;
  b.ensemble_size = 11;
  b.hypernet_lr = 0.05;
  ContinualRun ra(a, Variant::kMfrl, 4);
  ContinualRun rb(b, Variant::kMfrl, 4);
  ra.run();
  rb.run();
  EXPECT_EQ(ra.metrics(), rb.metrics());
}

TEST(ContinualRun, SnapshotCoversFinishedTasks) {
  auto c = tiny_config();
  ContinualRun run(c, Variant::kMbrl, 5);
  run.run_task();
  EXPECT_EQ(run.state().snapshot.task_ids(), (std::vector<int>{1}));
  run.run_task();
  EXPECT_EQ(run.state().snapshot.task_ids(), (std::vector<int>{1, 2}));
  // Task 1 trains without a penalty; task 2 is regularized toward task 1.
  for (const auto& row : run.metrics()) {
    if (row.task_id == 1) EXPECT_EQ(row.hypernet_regularization, 0.0);
    if (row.task_id == 2) EXPECT_GT(row.hypernet_regularization, 0.0);
  }
  run.run_task();
  EXPECT_EQ(run.state().snapshot.task_ids(), (std::vector<int>{1, 2, 3}));
  EXPECT_TRUE(run.finished());
  EXPECT_THROW(run.run_task(), ContractViolation);
}

TEST(ContinualRun, PolicyRestartsEachTask) {
  const auto c = tiny_config();
  ContinualRun run(c, Variant::kMbrl, 6);
  run.run_task();
  const auto hypernet_after_task1 = run.state().hypernet;
  run.step();  // first step of task 2; too little data for a SAC update
  const std::uint64_t seed = stage_seed(6, Variant::kMbrl, 2);
  const auto fresh = sac::sac_init(envsim::kObservationDim, 3, derive_seed(seed, "agent"), c.sac);
  EXPECT_EQ(run.state().agent, fresh);
  // M_alpha and M_beta were cleared; the model is already warm, so the one
  // real state yields one rollout.
  EXPECT_EQ(run.state().buffers.m_alpha.size(), 1u);
  EXPECT_EQ(run.state().buffers.m_beta.size(), 1u);
  // The world model and its training memory persist.
  EXPECT_EQ(run.state().buffers.m_gamma.size(), 2u * 96u + 1u);
  EXPECT_NE(run.state().hypernet.params, hypernet_after_task1.params);
}

TEST(ContinualRun, MetricsShapeAndOrder) {
  const auto c = tiny_config();
  ContinualRun run(c, Variant::kMbrl, 7);
  run.run();
  const auto& m = run.metrics();
  ASSERT_EQ(m.size(), (2u + 2u + 1u) * 2u);
  EXPECT_EQ(m[0].task_id, 1);
  EXPECT_EQ(m[0].episode, 0);
  EXPECT_EQ(m[0].step, 96);
  EXPECT_EQ(m[0].scenario, envsim::Scenario::kJanuaryLike);
  EXPECT_EQ(m[1].scenario, envsim::Scenario::kAprilLike);
  EXPECT_EQ(m[3].step, 192);
  EXPECT_EQ(m.back().task_id, 3);
  for (const auto& row : m) {
    EXPECT_LE(row.episodic_return, 0.0);
    EXPECT_EQ(row.wall_clock_s, 0.0);
  }
  ASSERT_EQ(run.reports().size(), 3u);
  EXPECT_EQ(run.reports()[0].eval_returns.size(), 2u);
}

TEST(ContinualRun, Deterministic) {
  const auto c = tiny_config();
  ContinualRun a(c, Variant::kMbrl, 8);
  ContinualRun b(c, Variant::kMbrl, 8);
  ContinualRun other(c, Variant::kMbrl, 9);
  a.run();
  b.run();
  other.run();
  EXPECT_EQ(a.metrics(), b.metrics());
  EXPECT_EQ(a.state().hypernet, b.state().hypernet);
  EXPECT_NE(a.metrics(), other.metrics());
}

TEST(ContinualRun, ResumeFromCopiedStateMatches) {
  const auto c = tiny_config();
  ContinualRun whole(c, Variant::kMbrl, 10);
  whole.run();
  ContinualRun first(c, Variant::kMbrl, 10);
  first.run(250);
  EXPECT_FALSE(first.finished());
  ContinualRun second(c, first.state());
  second.run();
  EXPECT_EQ(second.metrics(), whole.metrics());
  EXPECT_EQ(second.state().agent, whole.state().agent);
}

TEST(EvaluatePolicy, DeterministicAndSeeded) {
  const envsim::ThermalZone zone;
  const auto agent = sac::sac_init(envsim::kObservationDim, 1, 1);
  const auto task = envsim::TaskSpec::make(1);
  const auto a = evaluate_policy(zone, agent, task, envsim::Scenario::kAprilLike, 3, 2, {}, {});
  const auto b = evaluate_policy(zone, agent, task, envsim::Scenario::kAprilLike, 3, 2, {}, {});
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a, b);
  EXPECT_NE(a[0], a[1]);
  EXPECT_TRUE(evaluate_policy(zone, agent, task, envsim::Scenario::kAprilLike, 3, 0, {}, {})
                  .empty());
}

TEST(Seeds, StreamsAreDistinct) {
  EXPECT_NE(stage_seed(1, Variant::kMbrl, 1), stage_seed(1, Variant::kMfrl, 1));
  EXPECT_NE(stage_seed(1, Variant::kMbrl, 1), stage_seed(1, Variant::kMbrl, 2));
  EXPECT_NE(stage_seed(1, Variant::kMbrl, 1), stage_seed(2, Variant::kMbrl, 1));
  EXPECT_NE(eval_seed(1, envsim::Scenario::kJanuaryLike),
            eval_seed(1, envsim::Scenario::kAprilLike));
  EXPECT_EQ(hypernet_seed(4), hypernet_seed(4));
}

}  // namespace
}  // namespace cmbrl::dyna
