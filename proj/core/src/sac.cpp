#include "cmbrl/sac.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "cmbrl/errors.hpp"

namespace cmbrl::sac {
namespace {

using diffnet::Mat;
using diffnet::Vec;

constexpr double kSquashEps = 1e-6;
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

struct PolicySample {
  Mat eps;      // B x d standard normal draws (zero in deterministic mode)
  Mat std;      // B x d
  Mat squashed; // tanh(u), B x d, in [-1, 1]
  Mat clamped;  // 1 where the raw log-std was clipped
  Vec log_prob; // B
};

PolicySample squash_head(const Mat& head, int d, Mat eps, const SacConfig& config) {
  PolicySample s;
  const Mat raw_ls = head.rightCols(d);
  const Mat ls = raw_ls.cwiseMax(config.log_std_min).cwiseMin(config.log_std_max);
  s.clamped = ((raw_ls.array() < config.log_std_min) || (raw_ls.array() > config.log_std_max))
                  .cast<double>();
  s.std = ls.array().exp();
  s.eps = std::move(eps);
  Mat u = head.leftCols(d).array() + s.std.array() * s.eps.array();
  s.squashed = u;
  diffnet::apply_activation(diffnet::Activation::kTanh, s.squashed);
  const auto t2 = s.squashed.array().square();
  s.log_prob = (-0.5 * s.eps.array().square() - ls.array() - kHalfLog2Pi -
                (1.0 - t2 + kSquashEps).log())
                   .matrix()
                   .rowwise()
                   .sum();
  return s;
}

PolicySample sample_head(const Mat& head, int d, bool deterministic, Rng& rng,
                         const SacConfig& config) {
  Mat eps = Mat::Zero(head.rows(), d);
  if (!deterministic) {
    for (Eigen::Index i = 0; i < head.rows(); ++i) {
      for (int j = 0; j < d; ++j) eps(i, j) = rng.normal();
    }
  }
  return squash_head(head, d, std::move(eps), config);
}

Mat critic_input(const Mat& obs, const Mat& squashed) {
  Mat x(obs.rows(), obs.cols() + squashed.cols());
  x << obs, squashed;
  return x;
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw TrainingDivergence(std::string("non-finite ") + what);
}

}  // namespace

void ActionGrid::validate() const {
  if (levels.empty()) throw ContractViolation("ActionGrid: no levels");
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] < 0.0 || levels[i] > 1.0) throw ContractViolation("ActionGrid: outside [0,1]");
    if (i > 0 && !(levels[i] > levels[i - 1])) {
      throw ContractViolation("ActionGrid: levels must be strictly increasing");
    }
  }
}

double discretize(double value, const ActionGrid& grid) {
  const auto& lv = grid.levels;
  const auto it = std::lower_bound(lv.begin(), lv.end(), value);
  if (it == lv.begin()) return lv.front();
  if (it == lv.end()) return lv.back();
  const double hi = *it;
  const double lo = *(it - 1);
  return (hi - value) < (value - lo) ? hi : lo;
}

std::vector<double> discretize(std::span<const double> action, const ActionGrid& grid) {
  std::vector<double> out(action.size());
  for (std::size_t i = 0; i < action.size(); ++i) out[i] = discretize(action[i], grid);
  return out;
}

double AgentState::entropy_coeff() const { return std::exp(log_entropy_coeff); }

AgentState sac_init(int obs_dim, int action_dim, std::uint64_t seed, const SacConfig& config) {
  if (obs_dim < 1 || action_dim < 1) throw ContractViolation("sac_init: dims must be >= 1");
  AgentState a;
  a.obs_dim = obs_dim;
  a.action_dim = action_dim;

  std::vector<int> actor_sizes{obs_dim};
  actor_sizes.insert(actor_sizes.end(), config.actor_hidden.begin(), config.actor_hidden.end());
  actor_sizes.push_back(2 * action_dim);
  a.actor_spec = diffnet::NetSpec::mlp(actor_sizes, diffnet::Activation::kTanh);

  std::vector<int> critic_sizes{obs_dim + action_dim};
  critic_sizes.insert(critic_sizes.end(), config.critic_hidden.begin(),
                      config.critic_hidden.end());
  critic_sizes.push_back(1);
  a.critic_spec = diffnet::NetSpec::mlp(critic_sizes, diffnet::Activation::kTanh);

  a.actor = diffnet::mlp_init(a.actor_spec, derive_seed(seed, "actor"));
  a.critic1 = diffnet::mlp_init(a.critic_spec, derive_seed(seed, "critic", 1));
  a.critic2 = diffnet::mlp_init(a.critic_spec, derive_seed(seed, "critic", 2));
  a.target_critic1 = a.critic1;
  a.target_critic2 = a.critic2;
  a.log_entropy_coeff = std::log(config.initial_entropy_coeff);
  a.target_entropy = -static_cast<double>(action_dim);
  a.actor_opt = diffnet::AdamState::for_size(a.actor.size());
  a.critic1_opt = diffnet::AdamState::for_size(a.critic1.size());
  a.critic2_opt = diffnet::AdamState::for_size(a.critic2.size());
  a.entropy_opt = diffnet::AdamState::for_size(1);
  return a;
}

Mat select_actions(const AgentState& agent, const Mat& obs, ActionMode mode, Rng& rng,
                   const SacConfig& config) {
  if (obs.cols() != agent.obs_dim) throw ContractViolation("select_action: observation width");
  const Mat head = diffnet::forward(agent.actor_spec, agent.actor.span(), obs);
  const PolicySample s =
      sample_head(head, agent.action_dim, mode == ActionMode::kDeterministic, rng, config);
  Mat out = 0.5 * (s.squashed.array() + 1.0);
  return out.cwiseMax(0.0).cwiseMin(1.0);
}

std::vector<double> select_action(const AgentState& agent, std::span<const double> obs,
                                  ActionMode mode, Rng& rng, const SacConfig& config) {
  if (obs.size() != static_cast<std::size_t>(agent.obs_dim)) {
    throw ContractViolation("select_action: observation length");
  }
  const Mat x = Eigen::Map<const Mat>(obs.data(), 1, agent.obs_dim);
  const Mat a = select_actions(agent, x, mode, rng, config);
  return std::vector<double>(a.data(), a.data() + a.size());
}

SacBatch SacBatch::from_transitions(std::span<const envsim::Transition> batch, int action_dim) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  SacBatch b;
  b.obs.resize(n, envsim::kObservationDim);
  b.next_obs.resize(n, envsim::kObservationDim);
  b.actions.resize(n, action_dim);
  b.rewards.resize(n);
  b.not_done.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& tr = batch[static_cast<std::size_t>(i)];
    if (tr.policy_dim != action_dim) {
      throw ContractViolation("sac batch: transition action width " +
                              std::to_string(tr.policy_dim) + " != agent action_dim " +
                              std::to_string(action_dim));
    }
    const auto o = tr.obs.features();
    const auto o2 = tr.next_obs.features();
    for (int j = 0; j < envsim::kObservationDim; ++j) {
      b.obs(i, j) = o[j];
      b.next_obs(i, j) = o2[j];
    }
    for (int j = 0; j < action_dim; ++j) b.actions(i, j) = tr.policy_action[j];
    b.rewards(i) = tr.reward;
    b.not_done(i) = tr.terminal ? 0.0 : 1.0;
  }
  return b;
}

Vec td_targets(const AgentState& agent, const SacBatch& batch, Rng& rng,
               const SacConfig& config) {
  const Mat head = diffnet::forward(agent.actor_spec, agent.actor.span(), batch.next_obs);
  const PolicySample next = sample_head(head, agent.action_dim, false, rng, config);
  const Mat x = critic_input(batch.next_obs, next.squashed);
  const Mat q1 = diffnet::forward(agent.critic_spec, agent.target_critic1.span(), x);
  const Mat q2 = diffnet::forward(agent.critic_spec, agent.target_critic2.span(), x);
  const Vec min_q = q1.col(0).cwiseMin(q2.col(0));
  const double alpha = agent.entropy_coeff();
  return config.reward_scale * batch.rewards.array() +
         config.gamma * batch.not_done.array() * (min_q.array() - alpha * next.log_prob.array());
}

double actor_objective(const AgentState& agent, const Mat& obs, const Mat& eps,
                       const SacConfig& config, diffnet::ParamVector* grad, Vec* log_prob) {
  const int d = agent.action_dim;
  if (eps.rows() != obs.rows() || eps.cols() != d) {
    throw ContractViolation("actor_objective: noise shape mismatch");
  }
  const auto n = static_cast<double>(obs.rows());
  const double alpha = agent.entropy_coeff();
  diffnet::Tape actor_tape;
  const Mat head = diffnet::forward(agent.actor_spec, agent.actor.span(), obs, &actor_tape);
  const PolicySample s = squash_head(head, d, eps, config);
  const Mat xa = critic_input(obs, s.squashed);
  diffnet::Tape t1, t2;
  const Mat q1 = diffnet::forward(agent.critic_spec, agent.critic1.span(), xa, &t1);
  const Mat q2 = diffnet::forward(agent.critic_spec, agent.critic2.span(), xa, &t2);
  const Vec min_q = q1.col(0).cwiseMin(q2.col(0));
  const double loss = (alpha * s.log_prob - min_q).sum() / n;
  if (log_prob != nullptr) *log_prob = s.log_prob;
  if (grad == nullptr) return loss;

  const Vec pick1 = (q1.col(0).array() <= q2.col(0).array()).cast<double>();
  diffnet::ParamVector scratch1(agent.critic1.size(), 0.0);
  diffnet::ParamVector scratch2(agent.critic2.size(), 0.0);
  const Mat g1 = diffnet::backward(agent.critic_spec, agent.critic1.span(), t1,
                                   Mat(pick1 / n), scratch1.span(), true);
  const Mat g2 = diffnet::backward(agent.critic_spec, agent.critic2.span(), t2,
                                   Mat((1.0 - pick1.array()).matrix() / n), scratch2.span(), true);
  const Mat dminq_dt = (g1 + g2).rightCols(d);

  const auto t = s.squashed.array();
  const auto one_minus_t2 = 1.0 - t.square();
  const Mat dl_du = ((alpha / n) * 2.0 * t * one_minus_t2 / (one_minus_t2 + kSquashEps) -
                     dminq_dt.array() * one_minus_t2)
                        .matrix();
  Mat head_grad(head.rows(), 2 * d);
  head_grad.leftCols(d) = dl_du;
  head_grad.rightCols(d) = ((-alpha / n + dl_du.array() * s.std.array() * s.eps.array()) *
                            (1.0 - s.clamped.array()))
                               .matrix();
  *grad = diffnet::ParamVector(agent.actor.size(), 0.0);
  diffnet::backward(agent.actor_spec, agent.actor.span(), actor_tape, head_grad, grad->span());
  return loss;
}

SacLosses sac_update(AgentState& agent, std::span<const envsim::Transition> transitions,
                     const SacConfig& config, Rng& rng) {
  if (transitions.empty()) throw ContractViolation("sac_update: empty batch");
  const SacBatch batch = SacBatch::from_transitions(transitions, agent.action_dim);
  const auto n = static_cast<double>(batch.obs.rows());
  const int d = agent.action_dim;
  SacLosses losses;

  // Critics.
  const Vec target = td_targets(agent, batch, rng, config);
  const Mat x = critic_input(batch.obs, (2.0 * batch.actions.array() - 1.0).matrix());
  auto critic_step = [&](diffnet::ParamVector& params, diffnet::AdamState& opt) {
    diffnet::Tape tape;
    const Mat q = diffnet::forward(agent.critic_spec, params.span(), x, &tape);
    const Mat diff = q.col(0) - target;
    const double loss = diff.squaredNorm() / n;
    diffnet::ParamVector grad(params.size(), 0.0);
    diffnet::backward(agent.critic_spec, params.span(), tape, (2.0 / n) * diff, grad.span());
    diffnet::adam_step(params, grad, opt, config.lr_critic);
    return loss;
  };
  losses.critic1 = critic_step(agent.critic1, agent.critic1_opt);
  losses.critic2 = critic_step(agent.critic2, agent.critic2_opt);
  check_finite(losses.critic1, "critic1 loss");
  check_finite(losses.critic2, "critic2 loss");

  // Actor, reparameterized through tanh and the pointwise minimum of the critics.
  Mat eps(batch.obs.rows(), d);
  for (Eigen::Index i = 0; i < eps.rows(); ++i) {
    for (int j = 0; j < d; ++j) eps(i, j) = rng.normal();
  }
  diffnet::ParamVector actor_grad;
  Vec log_prob;
  losses.actor = actor_objective(agent, batch.obs, eps, config, &actor_grad, &log_prob);
  check_finite(losses.actor, "actor loss");
  diffnet::adam_step(agent.actor, actor_grad, agent.actor_opt, config.lr_actor);

  // Entropy coefficient: minimize -log_alpha * (log pi + target_entropy).
  const double mean_term = (log_prob.array() + agent.target_entropy).mean();
  losses.entropy_coeff = -agent.log_entropy_coeff * mean_term;
  check_finite(losses.entropy_coeff, "entropy coefficient loss");
  double log_alpha = agent.log_entropy_coeff;
  const double alpha_grad = -mean_term;
  diffnet::adam_step(std::span<double>(&log_alpha, 1), std::span<const double>(&alpha_grad, 1),
                     agent.entropy_opt, config.lr_entropy);
  agent.log_entropy_coeff = log_alpha;

  diffnet::soft_update(agent.target_critic1, agent.critic1, config.tau);
  diffnet::soft_update(agent.target_critic2, agent.critic2, config.tau);
  agent.update_count += 1;

  if (!agent.actor.all_finite() || !agent.critic1.all_finite() || !agent.critic2.all_finite() ||
      !std::isfinite(agent.log_entropy_coeff)) {
    throw TrainingDivergence("non-finite SAC parameters after update");
  }
  return losses;
}

}  // namespace cmbrl::sac
