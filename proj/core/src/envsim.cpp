#include "cmbrl/envsim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "cmbrl/errors.hpp"

namespace cmbrl::envsim {
namespace {

constexpr double kPeakOffsetS = 9.0 * 3600.0;  // sinusoid rises through the mean at 09:00
constexpr double kOccupiedStartS = 7.0 * 3600.0;
constexpr double kOccupiedEndS = 22.0 * 3600.0;

double time_of_day(double sim_time_s) {
  double t = std::fmod(sim_time_s, kSecondsPerDay);
  if (t < 0.0) t += kSecondsPerDay;
  return t;
}

double normalize_temp(double t) { return (t - 20.0) / 10.0; }

}  // namespace

std::string_view to_string(Scenario s) {
  return s == Scenario::kJanuaryLike ? "january_like" : "april_like";
}

Scenario scenario_from_string(std::string_view name) {
  if (name == "january_like") return Scenario::kJanuaryLike;
  if (name == "april_like") return Scenario::kAprilLike;
  throw ContractViolation("unknown scenario '" + std::string(name) + "'");
}

TaskSpec TaskSpec::make(int task_id) {
  if (task_id < 1 || task_id > 3) {
    throw ContractViolation("task_id must be 1, 2 or 3 (got " + std::to_string(task_id) + ")");
  }
  TaskSpec t;
  t.task_id = task_id;
  t.policy_controlled = task_id == 2 ? std::array<bool, 3>{true, true, true}
                                     : std::array<bool, 3>{true, false, false};
  t.one_hot = {0.0, 0.0, 0.0};
  t.one_hot[task_id - 1] = 1.0;
  return t;
}

int TaskSpec::action_dim() const {
  return static_cast<int>(std::count(policy_controlled.begin(), policy_controlled.end(), true));
}

WeatherShape weather_shape(Scenario s) {
  return s == Scenario::kJanuaryLike ? WeatherShape{-2.0, 4.0} : WeatherShape{10.0, 6.0};
}

double outdoor_temp(Scenario s, double sim_time_s, Rng* rng, double noise_sigma) {
  const WeatherShape w = weather_shape(s);
  const double phase = 2.0 * std::numbers::pi * (time_of_day(sim_time_s) - kPeakOffsetS) /
                       kSecondsPerDay;
  double temp = w.mean_c + w.amplitude_c * std::sin(phase);
  if (rng != nullptr) temp += noise_sigma * rng->normal();
  return temp;
}

WeatherTable::WeatherTable(std::vector<double> time_s, std::vector<double> temp_c)
    : time_s_(std::move(time_s)), temp_c_(std::move(temp_c)) {
  if (time_s_.empty() || time_s_.size() != temp_c_.size()) {
    throw ContractViolation("weather table: need equal, nonempty columns");
  }
  for (std::size_t i = 1; i < time_s_.size(); ++i) {
    if (!(time_s_[i] > time_s_[i - 1])) {
      throw ContractViolation("weather table: time_s must be strictly increasing");
    }
  }
}

WeatherTable WeatherTable::load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ContractViolation("cannot open weather table '" + path + "'");
  std::vector<double> times;
  std::vector<double> temps;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (line_no == 1 && line.rfind("time_s", 0) == 0) continue;
    std::istringstream row(line);
    std::string a, b;
    if (!std::getline(row, a, ',') || !std::getline(row, b)) {
      throw ContractViolation(path + ":" + std::to_string(line_no) + ": expected time_s,temp_c");
    }
    try {
      times.push_back(std::stod(a));
      temps.push_back(std::stod(b));
    } catch (const std::exception&) {
      throw ContractViolation(path + ":" + std::to_string(line_no) + ": not a number");
    }
  }
  return WeatherTable(std::move(times), std::move(temps));
}

double WeatherTable::at(double sim_time_s) const {
  if (sim_time_s <= time_s_.front()) return temp_c_.front();
  if (sim_time_s >= time_s_.back()) return temp_c_.back();
  const auto it = std::upper_bound(time_s_.begin(), time_s_.end(), sim_time_s);
  const auto hi = static_cast<std::size_t>(it - time_s_.begin());
  const std::size_t lo = hi - 1;
  const double w = (sim_time_s - time_s_[lo]) / (time_s_[hi] - time_s_[lo]);
  return temp_c_[lo] + w * (temp_c_[hi] - temp_c_[lo]);
}

Setpoints setpoint_schedule(double sim_time_s) {
  const double t = time_of_day(sim_time_s);
  if (t >= kOccupiedStartS && t < kOccupiedEndS) return {21.0, 24.0};
  return {15.0, 30.0};
}

double discomfort_reward(double zone_temp_c, double heating_c, double cooling_c, double dt_s) {
  const double violation =
      std::max(0.0, heating_c - zone_temp_c) + std::max(0.0, zone_temp_c - cooling_c);
  return -violation * (dt_s / 3600.0);
}

ActionVector apply_defaults(const TaskSpec& task, std::span<const double> policy_actions,
                            const EnvParams& params) {
  if (policy_actions.size() != static_cast<std::size_t>(task.action_dim())) {
    throw ContractViolation("apply_defaults: task " + std::to_string(task.task_id) + " expects " +
                            std::to_string(task.action_dim()) + " actions, got " +
                            std::to_string(policy_actions.size()));
  }
  ActionVector full{1.0, params.default_a2, params.default_a3};
  std::size_t next = 0;
  for (int i = 0; i < kNumActions; ++i) {
    if (task.policy_controlled[i]) full[i] = policy_actions[next++];
  }
  return full;
}

std::array<double, kObservationDim> Observation::features() const {
  std::array<double, kObservationDim> f{};
  f[0] = time_sin;
  f[1] = time_cos;
  f[2] = normalize_temp(zone_temp_c);
  for (int i = 0; i < kForecastSteps; ++i) f[3 + i] = normalize_temp(forecast_c[i]);
  return f;
}

ThermalZone::ThermalZone(EnvParams params, std::optional<WeatherTable> weather)
    : params_(params), weather_(std::move(weather)) {
  if (params_.steps_per_episode < 1 || !(params_.dt_s > 0.0)) {
    throw ContractViolation("ThermalZone: invalid episode length or time step");
  }
}

EnvState ThermalZone::reset(const TaskSpec& task, Scenario scenario, std::uint64_t seed) const {
  EnvState state;
  state.sim_time_s = 0.0;
  state.zone_temp_c = params_.initial_temp_c;
  state.scenario = scenario;
  state.task_id = task.task_id;
  state.step_index = 0;
  const int n = params_.steps_per_episode + kForecastSteps + 1;
  state.outdoor_trace_c.resize(n);
  Rng rng(seed);
  for (int k = 0; k < n; ++k) {
    const double t = k * params_.dt_s;
    state.outdoor_trace_c[k] = weather_ ? weather_->at(t)
                                        : outdoor_temp(scenario, t, &rng,
                                                       params_.weather_noise_sigma);
  }
  return state;
}

Observation ThermalZone::observe(const EnvState& state) const {
  Observation obs;
  const double angle = 2.0 * std::numbers::pi * time_of_day(state.sim_time_s) / kSecondsPerDay;
  obs.time_sin = std::sin(angle);
  obs.time_cos = std::cos(angle);
  obs.zone_temp_c = state.zone_temp_c;
  for (int i = 0; i < kForecastSteps; ++i) {
    obs.forecast_c[i] = state.outdoor_trace_c[state.step_index + 1 + i];
  }
  return obs;
}

double ThermalZone::next_temperature(double zone_temp_c, double outdoor_temp_c,
                                     const ActionVector& a) const {
  const double heat = params_.q_max_w * a[0] * (0.5 + 0.5 * a[1]) * a[2];
  const double flux = params_.ua_w_per_k * (outdoor_temp_c - zone_temp_c) + heat;
  const double next = zone_temp_c + (params_.dt_s / params_.capacitance_j_per_k) * flux;
  return std::clamp(next, params_.min_temp_c, params_.max_temp_c);
}

StepResult ThermalZone::step(EnvState& state, const ActionVector& actions) const {
  if (state.step_index >= params_.steps_per_episode) {
    throw EpisodeExhausted("episode finished after " + std::to_string(state.step_index) +
                           " steps");
  }
  for (double a : actions) {
    if (!(a >= 0.0 && a <= 1.0)) throw ContractViolation("env_step: actions must lie in [0, 1]");
  }
  StepResult result;
  result.setpoints = setpoint_schedule(state.sim_time_s);
  result.outdoor_temp_c = state.outdoor_trace_c[state.step_index];
  state.zone_temp_c = next_temperature(state.zone_temp_c, result.outdoor_temp_c, actions);
  state.step_index += 1;
  state.sim_time_s = state.step_index * params_.dt_s;
  result.reward = discomfort_reward(state.zone_temp_c, result.setpoints.heating_c,
                                    result.setpoints.cooling_c, params_.dt_s);
  result.obs = observe(state);
  return result;
}

}  // namespace cmbrl::envsim
