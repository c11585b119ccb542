#pragma once

// Single-zone RC thermal surrogate of a hydronic heat-pump building.
//
// Zone temperature T follows an explicit Euler step of
//   C dT/dt = UA (T_out - T) + Q_max * a1 * (0.5 + 0.5 a2) * a3
// where a1 is the heat pump modulation, a2 the evaporator fan, a3 the
// emission circuit pump, all in [0, 1]. Outdoor temperature is a daily
// sinusoid plus seeded Gaussian noise. Reward is negative discomfort in
// Kelvin-hours against a scheduled heating/cooling band.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cmbrl/rng.hpp"

namespace cmbrl::envsim {

inline constexpr int kNumActions = 3;
inline constexpr int kForecastSteps = 4;
inline constexpr int kObservationDim = 2 + 1 + kForecastSteps;
inline constexpr double kSecondsPerDay = 86400.0;

using ActionVector = std::array<double, kNumActions>;

enum class Scenario : std::uint8_t { kJanuaryLike = 0, kAprilLike = 1 };

std::string_view to_string(Scenario s);
// Accepts "january_like" / "april_like"; throws ContractViolation otherwise.
Scenario scenario_from_string(std::string_view name);

struct TaskSpec {
  int task_id = 1;
  std::array<bool, kNumActions> policy_controlled{true, false, false};
  std::array<double, 3> one_hot{1.0, 0.0, 0.0};

  // Tasks 1 and 3 control the heat pump modulation only; task 2 controls all three.
  static TaskSpec make(int task_id);
  int action_dim() const;
  bool operator==(const TaskSpec&) const = default;
};

struct EnvParams {
  double dt_s = 900.0;
  int steps_per_episode = 1344;
  double ua_w_per_k = 240.0;
  double capacitance_j_per_k = 12e6;
  double q_max_w = 9000.0;
  double default_a2 = 1.0;
  double default_a3 = 1.0;
  double initial_temp_c = 20.0;
  double min_temp_c = -20.0;
  double max_temp_c = 60.0;
  double weather_noise_sigma = 0.5;
};

struct WeatherShape {
  double mean_c;
  double amplitude_c;
};
WeatherShape weather_shape(Scenario s);

// Mean plus daily sinusoid (zero-crossing rising at 09:00, peak at 15:00)
// plus sigma * N(0,1) drawn from `rng`. A null rng suppresses the noise.
double outdoor_temp(Scenario s, double sim_time_s, Rng* rng, double noise_sigma = 0.5);

// Measured outdoor temperature table (time_s, temp_c), linearly interpolated
// and clamped at the ends. Replaces the synthetic generator when supplied.
class WeatherTable {
 public:
  WeatherTable(std::vector<double> time_s, std::vector<double> temp_c);
  // Comma-separated text with a header line "time_s,temp_c".
  static WeatherTable load_csv(const std::string& path);
  double at(double sim_time_s) const;

 private:
  std::vector<double> time_s_;
  std::vector<double> temp_c_;
};

struct Setpoints {
  double heating_c = 21.0;
  double cooling_c = 24.0;
  bool operator==(const Setpoints&) const = default;
};

// Occupied [07:00, 22:00) -> (21, 24); otherwise (15, 30).
Setpoints setpoint_schedule(double sim_time_s);

// -(max(0, heating - T) + max(0, T - cooling)) * dt / 3600, in Kelvin-hours.
double discomfort_reward(double zone_temp_c, double heating_c, double cooling_c,
                         double dt_s = 900.0);

// Completes the policy's actions with environment defaults for the slots the
// task does not control. Throws ContractViolation on a length mismatch.
ActionVector apply_defaults(const TaskSpec& task, std::span<const double> policy_actions,
                            const EnvParams& params = {});

struct Observation {
  double time_sin = 0.0;
  double time_cos = 1.0;
  double zone_temp_c = 20.0;
  std::array<double, kForecastSteps> forecast_c{};

  // Network-facing features: [sin, cos, (T-20)/10, (forecast-20)/10 ...].
  std::array<double, kObservationDim> features() const;
  bool operator==(const Observation&) const = default;
};

struct EnvState {
  double sim_time_s = 0.0;
  double zone_temp_c = 20.0;
  Scenario scenario = Scenario::kJanuaryLike;
  int task_id = 1;
  int step_index = 0;
  // Outdoor temperature at steps 0 .. steps_per_episode + kForecastSteps,
  // sampled once at reset so forecasts are exact.
  std::vector<double> outdoor_trace_c;

  bool operator==(const EnvState&) const = default;
};

struct Transition {
  Observation obs;
  ActionVector actions{};               // applied to the zone, defaults filled in
  std::array<double, kNumActions> policy_action{};  // continuous sample, first policy_dim used
  int policy_dim = 1;
  Observation next_obs;
  double reward = 0.0;
  Setpoints setpoints;                  // band active during the step
  int task_id = 1;
  bool synthetic = false;
  bool terminal = false;

  bool operator==(const Transition&) const = default;
};

struct StepResult {
  Observation obs;
  double reward = 0.0;
  Setpoints setpoints;
  double outdoor_temp_c = 0.0;
};

class ThermalZone {
 public:
  explicit ThermalZone(EnvParams params = {}, std::optional<WeatherTable> weather = std::nullopt);

  const EnvParams& params() const { return params_; }

  // Fresh episode at midnight with T = initial_temp_c. Deterministic in seed.
  EnvState reset(const TaskSpec& task, Scenario scenario, std::uint64_t seed) const;
  Observation observe(const EnvState& state) const;

  // Advances one dt. Throws EpisodeExhausted once steps_per_episode steps
  // have been taken, ContractViolation for actions outside [0, 1].
  StepResult step(EnvState& state, const ActionVector& actions) const;

  // The raw thermal update, clamped to [min_temp_c, max_temp_c].
  double next_temperature(double zone_temp_c, double outdoor_temp_c,
                          const ActionVector& actions) const;

 private:
  EnvParams params_;
  std::optional<WeatherTable> weather_;
};

}  // namespace cmbrl::envsim
