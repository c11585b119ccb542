#pragma once

// Learning-curve figures rendered as standalone SVG: evaluation return
// against episode, one figure per (task, scenario), every variant overlaid.
// Output bytes depend only on the rows.

#include <string>
#include <vector>

#include "cmbrl/metrics.hpp"

namespace cmbrl::plot {

struct Figure {
  int task_id = 1;
  envsim::Scenario scenario = envsim::Scenario::kJanuaryLike;
  std::string file_name;  // learning_curve_task<k>_<scenario>.svg
  std::string svg;
};

// Throws ContractViolation when `rows` is empty.
std::vector<Figure> learning_curves(const std::vector<MetricsRow>& rows);

// Writes every figure into `dir` (created if needed); returns the paths written.
std::vector<std::string> write_learning_curves(const std::vector<MetricsRow>& rows,
                                               const std::string& dir);

}  // namespace cmbrl::plot
