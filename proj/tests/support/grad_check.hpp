#pragma once

// Central finite-difference gradient oracle shared by the unit and
// acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <vector>

#include "cmbrl/rng.hpp"

namespace cmbrl::testing {

struct GradCheck {
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
  std::size_t checked = 0;
};

// Relative error |a - n| / max(|a|, |n|, floor). The floor keeps components
// that are zero up to rounding from dominating the statistic.
inline double relative_error(double analytic, double numeric, double floor = 1e-6) {
  return std::abs(analytic - numeric) /
         std::max({std::abs(analytic), std::abs(numeric), floor});
}

// Compares `analytic` against central differences of `loss` at `params`
// (restored afterwards) on `coords` coordinates chosen at random, or on all
// of them when coords >= params.size().
inline GradCheck check_gradient(const std::function<double()>& loss, std::span<double> params,
                                std::span<const double> analytic, std::size_t coords, Rng& rng,
                                double step = 1e-5) {
  std::vector<std::size_t> idx(params.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (coords < idx.size()) {
    for (std::size_t i = 0; i < coords; ++i) std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
    idx.resize(coords);
  }
  GradCheck out;
  for (std::size_t i : idx) {
    const double saved = params[i];
    params[i] = saved + step;
    const double up = loss();
    params[i] = saved - step;
    const double down = loss();
    params[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    out.max_rel_error = std::max(out.max_rel_error, relative_error(analytic[i], numeric));
    out.max_abs_error = std::max(out.max_abs_error, std::abs(analytic[i] - numeric));
    ++out.checked;
  }
  return out;
}

}  // namespace cmbrl::testing
