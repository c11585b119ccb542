#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "cmbrl/errors.hpp"
#include "cmbrl/sac.hpp"
#include "grad_check.hpp"

namespace cmbrl::sac {
namespace {

using diffnet::Mat;

envsim::Transition make_transition(Rng& rng, int action_dim, double reward, bool terminal) {
  envsim::Transition t;
  t.obs.zone_temp_c = rng.uniform(15.0, 25.0);
  t.next_obs.zone_temp_c = rng.uniform(15.0, 25.0);
  for (auto& f : t.obs.forecast_c) f = rng.uniform(-5.0, 5.0);
  for (auto& f : t.next_obs.forecast_c) f = rng.uniform(-5.0, 5.0);
  t.policy_dim = action_dim;
  for (int j = 0; j < action_dim; ++j) t.policy_action[j] = rng.uniform();
  t.reward = reward;
  t.terminal = terminal;
  return t;
}

TEST(SacInit, HeadSizesAndDeterminism) {
  const auto a1 = sac_init(7, 1, 5);
  EXPECT_EQ(a1.actor_spec.output_dim(), 2);
  EXPECT_EQ(a1.critic_spec.input_dim(), 8);
  const auto a3 = sac_init(7, 3, 5);
  EXPECT_EQ(a3.actor_spec.output_dim(), 6);
  EXPECT_EQ(a3.target_entropy, -3.0);
  EXPECT_EQ(sac_init(7, 3, 5), a3);
  EXPECT_NE(sac_init(7, 3, 6).actor, a3.actor);
  EXPECT_EQ(a3.target_critic1, a3.critic1);
  EXPECT_EQ(a3.target_critic2.size(), a3.critic2.size());
  EXPECT_NE(a3.critic1, a3.critic2);
  EXPECT_THROW(sac_init(0, 1, 1), ContractViolation);
}

TEST(SelectAction, ZeroActorGivesMidpoint) {
  auto agent = sac_init(7, 3, 1);
  std::fill(agent.actor.values().begin(), agent.actor.values().end(), 0.0);
  Rng rng(1);
  const std::vector<double> obs(7, 0.3);
  const auto a = select_action(agent, obs, ActionMode::kDeterministic, rng);
  ASSERT_EQ(a.size(), 3u);
  for (double v : a) EXPECT_EQ(v, 0.5);
}

TEST(SelectAction, StochasticInRangeAndReproducible) {
  const auto agent = sac_init(7, 3, 2);
  Rng obs_rng(3);
  Rng r1(10), r2(10);
  for (int i = 0; i < 500; ++i) {
    std::vector<double> obs(7);
    for (auto& o : obs) o = 3.0 * obs_rng.normal();
    const auto a = select_action(agent, obs, ActionMode::kStochastic, r1);
    const auto b = select_action(agent, obs, ActionMode::kStochastic, r2);
    ASSERT_EQ(a, b);
    for (double v : a) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
  EXPECT_THROW(select_action(agent, std::vector<double>(6), ActionMode::kStochastic, r1),
               ContractViolation);
}

TEST(Discretize, NearestWithTiesDown) {
  const ActionGrid grid;
  EXPECT_EQ(discretize(0.6, grid), 0.5);
  EXPECT_EQ(discretize(0.875, grid), 0.75);
  EXPECT_EQ(discretize(0.125, grid), 0.0);
  EXPECT_EQ(discretize(0.13, grid), 0.25);
  for (double v : grid.levels) EXPECT_EQ(discretize(v, grid), v);
  EXPECT_EQ(discretize(-0.3, grid), 0.0);
  EXPECT_EQ(discretize(1.4, grid), 1.0);
}

TEST(Discretize, Idempotent) {
  const ActionGrid grid{{0.0, 0.1, 0.45, 0.8, 1.0}};
  Rng rng(6);
  for (int i = 0; i < 1000; ++i) {
    const double once = discretize(rng.uniform(), grid);
    EXPECT_EQ(discretize(once, grid), once);
  }
  const std::vector<double> v{0.33, 0.61, 0.99};
  EXPECT_EQ(discretize(discretize(v, grid), grid), discretize(v, grid));
}

TEST(ActionGrid, Validation) {
  EXPECT_NO_THROW(ActionGrid{}.validate());
  EXPECT_THROW(ActionGrid{{}}.validate(), ContractViolation);
  EXPECT_THROW((ActionGrid{{0.0, 0.5, 0.5}}).validate(), ContractViolation);
  EXPECT_THROW((ActionGrid{{0.0, 1.5}}).validate(), ContractViolation);
  EXPECT_THROW((ActionGrid{{0.5, 0.2}}).validate(), ContractViolation);
}

TEST(PolicyGate, EveryOtherStep) {
  EXPECT_TRUE(policy_update_gate(4));
  EXPECT_FALSE(policy_update_gate(5));
  EXPECT_TRUE(policy_update_gate(0));
  EXPECT_TRUE(policy_update_gate(9, 3));
  EXPECT_FALSE(policy_update_gate(10, 3));
}

TEST(TdTargets, TerminalZeroRewardIsZero) {
  const auto agent = sac_init(7, 1, 4);
  Rng rng(1);
  std::vector<envsim::Transition> batch;
  for (int i = 0; i < 16; ++i) batch.push_back(make_transition(rng, 1, 0.0, true));
  const auto b = SacBatch::from_transitions(batch, 1);
  const auto y = td_targets(agent, b, rng, SacConfig{});
  for (Eigen::Index i = 0; i < y.size(); ++i) EXPECT_EQ(y(i), 0.0);
}

TEST(TdTargets, SymmetricInCriticOrder) {
  auto agent = sac_init(7, 1, 4);
  auto swapped = agent;
  std::swap(swapped.critic1, swapped.critic2);
  std::swap(swapped.target_critic1, swapped.target_critic2);
  Rng data(2);
  std::vector<envsim::Transition> batch;
  for (int i = 0; i < 32; ++i) batch.push_back(make_transition(data, 1, -0.3, false));
  const auto b = SacBatch::from_transitions(batch, 1);
  Rng r1(9), r2(9);
  EXPECT_EQ(td_targets(agent, b, r1, SacConfig{}), td_targets(swapped, b, r2, SacConfig{}));

  // Identical critics: the minimum is either one of them.
  auto twin = agent;
  twin.critic2 = twin.critic1;
  twin.target_critic2 = twin.target_critic1;
  auto single = twin;
  Rng r3(9), r4(9);
  EXPECT_EQ(td_targets(twin, b, r3, SacConfig{}), td_targets(single, b, r4, SacConfig{}));
}

TEST(SacUpdate, OverfitsOneBatch) {
  auto agent = sac_init(7, 1, 8);
  Rng data(3);
  const auto t = make_transition(data, 1, 0.0, true);
  const std::vector<envsim::Transition> batch(64, t);
  Rng rng(4);
  const auto first = sac_update(agent, batch, SacConfig{}, rng);
  double last = first.critic1;
  for (int i = 1; i < 500; ++i) last = sac_update(agent, batch, SacConfig{}, rng).critic1;
  EXPECT_GT(first.critic1, 0.0);
  EXPECT_LT(last, 1e-3 * first.critic1);
  EXPECT_GT(agent.entropy_coeff(), 0.0);
  EXPECT_EQ(agent.update_count, 500);
}

TEST(SacUpdate, TauEndpoints) {
  Rng data(5);
  std::vector<envsim::Transition> batch;
  for (int i = 0; i < 32; ++i) batch.push_back(make_transition(data, 3, -0.5, false));

  SacConfig frozen;
  frozen.tau = 0.0;
  auto a = sac_init(7, 3, 1);
  const auto t1 = a.target_critic1;
  const auto t2 = a.target_critic2;
  Rng rng(1);
  sac_update(a, batch, frozen, rng);
  EXPECT_EQ(a.target_critic1, t1);
  EXPECT_EQ(a.target_critic2, t2);
  EXPECT_NE(a.critic1, t1);

  SacConfig copy;
  copy.tau = 1.0;
  auto b = sac_init(7, 3, 1);
  sac_update(b, batch, copy, rng);
  EXPECT_EQ(b.target_critic1, b.critic1);
  EXPECT_EQ(b.target_critic2, b.critic2);
}

TEST(SacUpdate, DeterministicGivenSeed) {
  Rng data(5);
  std::vector<envsim::Transition> batch;
  for (int i = 0; i < 32; ++i) batch.push_back(make_transition(data, 1, -0.5, i % 7 == 0));
  auto a = sac_init(7, 1, 1);
  auto b = a;
  Rng ra(3), rb(3);
  for (int i = 0; i < 5; ++i) {
    sac_update(a, batch, SacConfig{}, ra);
    sac_update(b, batch, SacConfig{}, rb);
  }
  EXPECT_EQ(a, b);
}

TEST(SacUpdate, RejectsMismatchedActionWidth) {
  Rng data(5);
  std::vector<envsim::Transition> batch{make_transition(data, 3, 0.0, false)};
  auto agent = sac_init(7, 1, 1);
  Rng rng(1);
  EXPECT_THROW(sac_update(agent, batch, SacConfig{}, rng), ContractViolation);
  EXPECT_THROW(sac_update(agent, {}, SacConfig{}, rng), ContractViolation);
}

TEST(SacUpdate, NonFiniteRewardDiverges) {
  Rng data(5);
  std::vector<envsim::Transition> batch{
      make_transition(data, 1, std::numeric_limits<double>::quiet_NaN(), false)};
  auto agent = sac_init(7, 1, 1);
  Rng rng(1);
  EXPECT_THROW(sac_update(agent, batch, SacConfig{}, rng), TrainingDivergence);
}

TEST(ActorObjective, GradientMatchesFiniteDifferences) {
  SacConfig config;
  config.actor_hidden = {16, 16};
  config.critic_hidden = {16, 16};
  Rng rng(77);
  for (int action_dim : {1, 3}) {
    for (int draw = 0; draw < 10; ++draw) {
      auto agent = sac_init(7, action_dim, 200 + draw, config);
      agent.log_entropy_coeff = std::log(0.05 + 0.5 * rng.uniform());
      Mat obs(6, 7), eps(6, action_dim);
      for (Eigen::Index i = 0; i < obs.size(); ++i) obs.data()[i] = rng.normal();
      for (Eigen::Index i = 0; i < eps.size(); ++i) eps.data()[i] = rng.normal();
      diffnet::ParamVector grad;
      actor_objective(agent, obs, eps, config, &grad);
      auto loss = [&] { return actor_objective(agent, obs, eps, config, nullptr); };
      const auto c = testing::check_gradient(loss, agent.actor.span(), grad.span(), 200, rng);
      EXPECT_LT(c.max_rel_error, 1e-4) << "action_dim " << action_dim << " draw " << draw;
    }
  }
}

}  // namespace
}  // namespace cmbrl::sac
