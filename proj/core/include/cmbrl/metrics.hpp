#pragma once

// Learning-curve rows and their comma-separated text form.
//
// Header (fixed):
//   variant,task_id,episode,step,scenario,episodic_return,train_return,
//   hypernet_mse_dynamics,hypernet_mse_reward,hypernet_regularization,wall_clock_s
// One row per (variant, task, episode, evaluation scenario). `step` counts
// real environment steps taken in the task so far. Reals are printed in shortest
// round-trip form so every row parses back exactly.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "cmbrl/envsim.hpp"

namespace cmbrl {

enum class Variant : std::uint8_t { kMbrl = 0, kMfrl = 1 };
std::string_view to_string(Variant v);
Variant variant_from_string(std::string_view name);

struct MetricsRow {
  Variant variant = Variant::kMbrl;
  int task_id = 1;
  int episode = 0;
  std::int64_t step = 0;
  envsim::Scenario scenario = envsim::Scenario::kJanuaryLike;
  double episodic_return = 0.0;   // deterministic evaluation, K*h
  double train_return = 0.0;      // the training episode itself, K*h
  double hypernet_mse_dynamics = 0.0;
  double hypernet_mse_reward = 0.0;
  double hypernet_regularization = 0.0;
  double wall_clock_s = 0.0;

  bool operator==(const MetricsRow&) const = default;
};

extern const char* const kMetricsHeader;

std::string format_metrics_row(const MetricsRow& row);
// Throws ContractViolation with a message naming the problem.
MetricsRow parse_metrics_row(std::string_view line);

void write_metrics(std::ostream& out, const std::vector<MetricsRow>& rows);
void write_metrics_file(const std::string& path, const std::vector<MetricsRow>& rows);

// Throws ContractViolation("<path>:<line>: ...") at the first malformed line,
// or when the file has no data rows.
std::vector<MetricsRow> read_metrics_file(const std::string& path);

}  // namespace cmbrl
