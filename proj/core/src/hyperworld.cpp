#include "cmbrl/hyperworld.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cmbrl/errors.hpp"

namespace cmbrl::hyperworld {
namespace {

using diffnet::Mat;
using diffnet::ParamVector;
using diffnet::Vec;

// Rows of the hypernetwork input for every layer of both targets.
void fill_condition_rows(const HypernetState& h, int task_id, std::span<const double> noise,
                         Mat& rows, Eigen::Index first_row) {
  const int nl = h.num_layers();
  for (int l = 0; l < nl; ++l) {
    auto row = rows.row(first_row + l);
    row.setZero();
    row(task_id - 1) = 1.0;
    row(kNumTasks + l) = 1.0;
    for (int k = 0; k < h.noise_dim; ++k) row(kNumTasks + nl + k) = noise[k];
  }
}

ParamVector assemble(const HypernetState& h, TargetKind kind, const Mat& out,
                     Eigen::Index first_row) {
  ParamVector p(h.targets.of(kind).param_count(), 0.0);
  for (const ChunkEntry& c : h.chunk_table) {
    if (c.target != kind) continue;
    const auto row = out.row(first_row + c.layer_id);
    std::copy(row.data(), row.data() + c.size, p.data() + c.offset);
  }
  return p;
}

// Adds a target-parameter gradient into the rows of the output gradient.
void scatter(const HypernetState& h, TargetKind kind, std::span<const double> g, Mat& out_grad,
             Eigen::Index first_row, double scale) {
  for (const ChunkEntry& c : h.chunk_table) {
    if (c.target != kind) continue;
    auto row = out_grad.row(first_row + c.layer_id);
    for (std::size_t i = 0; i < c.size; ++i) row(static_cast<Eigen::Index>(i)) += scale * g[c.offset + i];
  }
}

void check_task(int task_id) {
  if (task_id < 1 || task_id > kNumTasks) {
    throw ContractViolation("task_id out of range: " + std::to_string(task_id));
  }
}

void check_noise(const HypernetState& h, std::span<const double> noise) {
  if (noise.size() != static_cast<std::size_t>(h.noise_dim)) {
    throw ContractViolation("noise length " + std::to_string(noise.size()) + " != noise_dim " +
                            std::to_string(h.noise_dim));
  }
}

double norm_temp(double t, const Normalization& n) { return (t - n.temp_center) / n.temp_scale; }

}  // namespace

TargetSpec TargetSpec::make(const std::vector<int>& hidden) {
  std::vector<int> sizes{kTargetInputDim};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(1);
  TargetSpec t;
  t.dynamics = diffnet::NetSpec::mlp(sizes, diffnet::Activation::kTanh);
  t.reward = t.dynamics;
  return t;
}

HypernetState hypernet_init(const HyperworldConfig& config, std::uint64_t seed) {
  if (config.noise_dim < 0) throw ContractViolation("noise_dim must be >= 0");
  HypernetState h;
  h.targets = TargetSpec::make(config.target_hidden);
  h.noise_dim = config.noise_dim;
  h.noise_sigma = config.noise_sigma;
  h.norm = config.norm;

  std::size_t widest = 0;
  int layer_id = 0;
  for (TargetKind kind : {TargetKind::kDynamics, TargetKind::kReward}) {
    const auto& spec = h.targets.of(kind);
    for (int l = 0; l < spec.num_layers(); ++l) {
      ChunkEntry c{kind, l, layer_id++, spec.layer_param_count(l), spec.layer_offset(l)};
      widest = std::max(widest, c.size);
      h.chunk_table.push_back(c);
    }
  }
  std::vector<int> sizes{h.conditioning_dim()};
  sizes.insert(sizes.end(), config.hypernet_hidden.begin(), config.hypernet_hidden.end());
  sizes.push_back(static_cast<int>(widest));
  h.spec = diffnet::NetSpec::mlp(sizes, diffnet::Activation::kTanh);
  h.params = diffnet::mlp_init(h.spec, seed);
  h.opt = diffnet::AdamState::for_size(h.params.size());
  return h;
}

std::vector<double> encode_condition(int task_id, int layer_id, std::span<const double> noise,
                                     int num_layers) {
  check_task(task_id);
  if (layer_id < 0 || layer_id >= num_layers) {
    throw ContractViolation("layer_id out of range: " + std::to_string(layer_id));
  }
  std::vector<double> c(kNumTasks + num_layers + noise.size(), 0.0);
  c[task_id - 1] = 1.0;
  c[kNumTasks + layer_id] = 1.0;
  std::copy(noise.begin(), noise.end(), c.begin() + kNumTasks + num_layers);
  return c;
}

std::vector<double> draw_noise(const HypernetState& hypernet, Rng& rng) {
  std::vector<double> noise(hypernet.noise_dim);
  for (double& v : noise) v = hypernet.noise_sigma * rng.normal();
  return noise;
}

GeneratedTarget generate_target(const HypernetState& hypernet, TargetKind kind, int task_id,
                                std::span<const double> noise) {
  check_task(task_id);
  check_noise(hypernet, noise);
  Mat rows(hypernet.num_layers(), hypernet.conditioning_dim());
  fill_condition_rows(hypernet, task_id, noise, rows, 0);
  const Mat out = diffnet::forward(hypernet.spec, hypernet.params.span(), rows);
  GeneratedTarget g;
  g.kind = kind;
  g.task_id = task_id;
  g.noise.assign(noise.begin(), noise.end());
  g.params = assemble(hypernet, kind, out, 0);
  return g;
}

std::array<double, kTargetInputDim> target_input(const envsim::Observation& obs,
                                                 const envsim::Setpoints& sp,
                                                 const envsim::ActionVector& actions,
                                                 const Normalization& norm) {
  double forecast = obs.forecast_c[0];
  if (norm.forecast == ForecastSummary::kMean) {
    forecast = 0.0;
    for (double f : obs.forecast_c) forecast += f;
    forecast /= envsim::kForecastSteps;
  }
  return {norm_temp(obs.zone_temp_c, norm), norm_temp(forecast, norm),
          norm_temp(sp.cooling_c, norm),    norm_temp(sp.heating_c, norm),
          actions[0],                       actions[1],
          actions[2]};
}

double target_predict(const GeneratedTarget& generated, const diffnet::NetSpec& spec,
                      std::span<const double> state_action) {
  return diffnet::mlp_forward(spec, generated.params, state_action).front();
}

double denormalize(TargetKind kind, std::span<const double> state_action, double raw,
                   const Normalization& norm) {
  if (kind == TargetKind::kReward) return raw * norm.reward_scale;
  const double temp = state_action[0] * norm.temp_scale + norm.temp_center;
  return temp + raw * norm.delta_scale;
}

Ensemble generate_ensemble(const HypernetState& hypernet, int task_id, int n_models, Rng& rng) {
  check_task(task_id);
  if (n_models < 1) throw ContractViolation("n_models must be >= 1");
  const int nl = hypernet.num_layers();
  Mat rows(static_cast<Eigen::Index>(n_models) * nl, hypernet.conditioning_dim());
  for (int m = 0; m < n_models; ++m) {
    const auto noise = draw_noise(hypernet, rng);
    fill_condition_rows(hypernet, task_id, noise, rows, static_cast<Eigen::Index>(m) * nl);
  }
  const Mat out = diffnet::forward(hypernet.spec, hypernet.params.span(), rows);
  Ensemble e;
  e.task_id = task_id;
  e.dynamics.reserve(n_models);
  e.reward.reserve(n_models);
  for (int m = 0; m < n_models; ++m) {
    const Eigen::Index first = static_cast<Eigen::Index>(m) * nl;
    e.dynamics.push_back(assemble(hypernet, TargetKind::kDynamics, out, first));
    e.reward.push_back(assemble(hypernet, TargetKind::kReward, out, first));
  }
  return e;
}

BatchStats ensemble_predict_batch(const HypernetState& hypernet, const Ensemble& ensemble,
                                  TargetKind kind, const Mat& inputs) {
  const auto& members = kind == TargetKind::kDynamics ? ensemble.dynamics : ensemble.reward;
  const auto& spec = hypernet.targets.of(kind);
  const Eigen::Index n = inputs.rows();
  const auto m = static_cast<Eigen::Index>(members.size());
  Mat preds(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    preds.col(j) = diffnet::forward(spec, members[j].span(), inputs).col(0);
  }
  if (kind == TargetKind::kDynamics) {
    const Vec temp = inputs.col(0).array() * hypernet.norm.temp_scale + hypernet.norm.temp_center;
    preds = (preds * hypernet.norm.delta_scale).colwise() + temp;
  } else {
    preds *= hypernet.norm.reward_scale;
  }
  BatchStats s;
  // Shifted by the first member so identical predictions give exactly zero spread.
  const Vec first = preds.col(0);
  const Mat centered = preds.colwise() - first;
  const Vec shift = centered.rowwise().sum() / static_cast<double>(m);
  s.mean = first + shift;
  s.stddev = ((centered.colwise() - shift).array().square().rowwise().sum() /
              static_cast<double>(m))
                 .sqrt()
                 .matrix();
  return s;
}

EnsembleStats ensemble_predict(const HypernetState& hypernet, TargetKind kind, int task_id,
                               std::span<const double> state_action, int n_models, Rng& rng) {
  if (state_action.size() != kTargetInputDim) {
    throw ContractViolation("ensemble_predict: input must have 7 values");
  }
  const Ensemble e = generate_ensemble(hypernet, task_id, n_models, rng);
  const Mat x = Eigen::Map<const Mat>(state_action.data(), 1, kTargetInputDim);
  const BatchStats s = ensemble_predict_batch(hypernet, e, kind, x);
  return {s.mean(0), s.stddev(0)};
}

std::vector<int> RegularizationSnapshot::task_ids() const {
  std::vector<int> ids;
  for (const auto& [id, _] : entries_) ids.push_back(id);
  return ids;
}

TaskParams canonical_params(const HypernetState& hypernet, int task_id) {
  const std::vector<double> zero(hypernet.noise_dim, 0.0);
  check_task(task_id);
  Mat rows(hypernet.num_layers(), hypernet.conditioning_dim());
  fill_condition_rows(hypernet, task_id, zero, rows, 0);
  const Mat out = diffnet::forward(hypernet.spec, hypernet.params.span(), rows);
  return {assemble(hypernet, TargetKind::kDynamics, out, 0),
          assemble(hypernet, TargetKind::kReward, out, 0)};
}

RegularizationSnapshot capture_snapshot(const HypernetState& hypernet,
                                        std::span<const int> completed_task_ids) {
  std::map<int, TaskParams> entries;
  for (int id : completed_task_ids) entries[id] = canonical_params(hypernet, id);
  return RegularizationSnapshot(std::move(entries));
}

double snapshot_distance(const HypernetState& hypernet, const RegularizationSnapshot& snapshot,
                         int task_id) {
  const TaskParams now = canonical_params(hypernet, task_id);
  const TaskParams& then = snapshot.at(task_id);
  double sum = 0.0;
  for (std::size_t i = 0; i < now.dynamics.size(); ++i) {
    const double d = now.dynamics[i] - then.dynamics[i];
    sum += d * d;
  }
  for (std::size_t i = 0; i < now.reward.size(); ++i) {
    const double d = now.reward[i] - then.reward[i];
    sum += d * d;
  }
  return sum / static_cast<double>(now.dynamics.size() + now.reward.size());
}

TrainingBatch TrainingBatch::from_transitions(std::span<const envsim::Transition> batch,
                                              const Normalization& norm) {
  const auto n = static_cast<Eigen::Index>(batch.size());
  TrainingBatch b;
  b.inputs.resize(n, kTargetInputDim);
  b.next_temp.resize(n, 1);
  b.reward.resize(n, 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& tr = batch[static_cast<std::size_t>(i)];
    const auto x = target_input(tr.obs, tr.setpoints, tr.actions, norm);
    for (int j = 0; j < kTargetInputDim; ++j) b.inputs(i, j) = x[j];
    b.next_temp(i, 0) = (tr.next_obs.zone_temp_c - tr.obs.zone_temp_c) / norm.delta_scale;
    b.reward(i, 0) = tr.reward / norm.reward_scale;
  }
  return b;
}

HypernetLosses hypernet_loss(const HypernetState& hypernet, const TrainingBatch& batch,
                             int task_id, std::span<const double> noise,
                             const RegularizationSnapshot& snapshot, double beta,
                             ParamVector* grad) {
  check_task(task_id);
  check_noise(hypernet, noise);
  if (batch.inputs.rows() == 0) throw ContractViolation("hypernet_loss: empty batch");
  const int nl = hypernet.num_layers();
  const auto n_prev = static_cast<Eigen::Index>(snapshot.entries().size());
  Mat rows((1 + n_prev) * nl, hypernet.conditioning_dim());
  fill_condition_rows(hypernet, task_id, noise, rows, 0);
  const std::vector<double> zero(hypernet.noise_dim, 0.0);
  {
    Eigen::Index block = 1;
    for (const auto& [id, _] : snapshot.entries()) {
      fill_condition_rows(hypernet, id, zero, rows, block * nl);
      ++block;
    }
  }
  diffnet::Tape htape;
  const Mat out = diffnet::forward(hypernet.spec, hypernet.params.span(), rows,
                                   grad != nullptr ? &htape : nullptr);
  Mat out_grad;
  if (grad != nullptr) out_grad = Mat::Zero(out.rows(), out.cols());

  HypernetLosses losses;
  auto fit = [&](TargetKind kind, const Mat& targets) {
    const auto& spec = hypernet.targets.of(kind);
    const ParamVector p = assemble(hypernet, kind, out, 0);
    diffnet::Tape ttape;
    const Mat pred = diffnet::forward(spec, p.span(), batch.inputs, grad ? &ttape : nullptr);
    const Mat diff = pred - targets;
    const double n = static_cast<double>(diff.size());
    if (grad != nullptr) {
      ParamVector g(spec.param_count(), 0.0);
      diffnet::backward(spec, p.span(), ttape, (2.0 / n) * diff, g.span());
      scatter(hypernet, kind, g.span(), out_grad, 0, 1.0);
    }
    return diff.squaredNorm() / n;
  };
  losses.mse_dynamics = fit(TargetKind::kDynamics, batch.next_temp);
  losses.mse_reward = fit(TargetKind::kReward, batch.reward);

  Eigen::Index block = 1;
  for (const auto& [id, old] : snapshot.entries()) {
    const Eigen::Index first = block * nl;
    const ParamVector pd = assemble(hypernet, TargetKind::kDynamics, out, first);
    const ParamVector pr = assemble(hypernet, TargetKind::kReward, out, first);
    const double count = static_cast<double>(pd.size() + pr.size());
    std::vector<double> dd(pd.size());
    std::vector<double> dr(pr.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < pd.size(); ++i) {
      dd[i] = pd[i] - old.dynamics[i];
      sum += dd[i] * dd[i];
    }
    for (std::size_t i = 0; i < pr.size(); ++i) {
      dr[i] = pr[i] - old.reward[i];
      sum += dr[i] * dr[i];
    }
    losses.regularization += sum / count;
    if (grad != nullptr && beta != 0.0) {
      scatter(hypernet, TargetKind::kDynamics, dd, out_grad, first, 2.0 * beta / count);
      scatter(hypernet, TargetKind::kReward, dr, out_grad, first, 2.0 * beta / count);
    }
    ++block;
  }
  losses.total = losses.mse_dynamics + losses.mse_reward + beta * losses.regularization;

  if (grad != nullptr) {
    *grad = ParamVector(hypernet.params.size(), 0.0);
    diffnet::backward(hypernet.spec, hypernet.params.span(), htape, out_grad, grad->span());
  }
  return losses;
}

HypernetLosses hypernet_train_step(HypernetState& hypernet,
                                   std::span<const envsim::Transition> batch, int task_id,
                                   const RegularizationSnapshot& snapshot, double beta, double lr,
                                   Rng& rng) {
  const auto noise = draw_noise(hypernet, rng);
  const TrainingBatch tb = TrainingBatch::from_transitions(batch, hypernet.norm);
  ParamVector grad;
  const HypernetLosses losses = hypernet_loss(hypernet, tb, task_id, noise, snapshot, beta, &grad);
  if (!std::isfinite(losses.total)) throw TrainingDivergence("non-finite hypernetwork loss");
  diffnet::adam_step(hypernet.params, grad, hypernet.opt, lr);
  return losses;
}

std::vector<envsim::Transition> synthetic_rollouts(const HypernetState& hypernet,
                                                   const Ensemble& ensemble,
                                                   const envsim::TaskSpec& task,
                                                   std::span<const envsim::Transition> real,
                                                   const sac::AgentState& agent,
                                                   const sac::ActionGrid& grid,
                                                   const sac::SacConfig& sac_config,
                                                   const envsim::EnvParams& env_params, Rng& rng) {
  const auto n = static_cast<Eigen::Index>(real.size());
  std::vector<envsim::Transition> out;
  if (n == 0) return out;
  const int d = task.action_dim();
  if (agent.action_dim != d) throw ContractViolation("synthetic_rollouts: agent/task mismatch");

  Mat obs(n, envsim::kObservationDim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto f = real[static_cast<std::size_t>(i)].obs.features();
    for (int j = 0; j < envsim::kObservationDim; ++j) obs(i, j) = f[j];
  }
  const Mat cont = sac::select_actions(agent, obs, sac::ActionMode::kStochastic, rng, sac_config);

  out.resize(real.size());
  Mat inputs(n, kTargetInputDim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& src = real[static_cast<std::size_t>(i)];
    auto& tr = out[static_cast<std::size_t>(i)];
    std::vector<double> a(cont.row(i).data(), cont.row(i).data() + d);
    const auto snapped = sac::discretize(a, grid);
    tr.obs = src.obs;
    tr.actions = envsim::apply_defaults(task, snapped, env_params);
    tr.policy_dim = d;
    for (int j = 0; j < d; ++j) tr.policy_action[j] = a[j];
    tr.setpoints = src.setpoints;
    tr.task_id = task.task_id;
    tr.synthetic = true;
    tr.terminal = false;
    const auto x = target_input(tr.obs, tr.setpoints, tr.actions, hypernet.norm);
    for (int j = 0; j < kTargetInputDim; ++j) inputs(i, j) = x[j];
  }
  const BatchStats temp = ensemble_predict_batch(hypernet, ensemble, TargetKind::kDynamics, inputs);
  const BatchStats rew = ensemble_predict_batch(hypernet, ensemble, TargetKind::kReward, inputs);
  for (Eigen::Index i = 0; i < n; ++i) {
    auto& tr = out[static_cast<std::size_t>(i)];
    tr.next_obs = real[static_cast<std::size_t>(i)].next_obs;
    tr.next_obs.zone_temp_c =
        std::clamp(temp.mean(i), env_params.min_temp_c, env_params.max_temp_c);
    tr.reward = std::min(0.0, rew.mean(i));
  }
  return out;
}

envsim::Transition synthetic_rollout(const HypernetState& hypernet, const Ensemble& ensemble,
                                     const envsim::TaskSpec& task,
                                     const envsim::Transition& real, const sac::AgentState& agent,
                                     const sac::ActionGrid& grid,
                                     const sac::SacConfig& sac_config,
                                     const envsim::EnvParams& env_params, Rng& rng) {
  return synthetic_rollouts(hypernet, ensemble, task, std::span(&real, 1), agent, grid,
                            sac_config, env_params, rng)
      .front();
}

}  // namespace cmbrl::hyperworld
