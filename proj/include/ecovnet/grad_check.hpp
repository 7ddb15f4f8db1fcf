#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "ecovnet/tensor.hpp"

namespace ecov {

struct GradCheckResult {
  double max_rel_err = 0.0;
  int64_t worst_index = -1;
  double analytic_at_worst = 0.0;
  double numeric_at_worst = 0.0;
};

// Compares an analytic gradient against central differences of a scalar loss.
// The loss functional must read the current contents of wrt, which this
// routine perturbs in place and restores. Step size scales with the magnitude
// of each entry so large weights do not drown in rounding error.
inline GradCheckResult grad_check(const std::function<double()>& loss, const TensorD& analytic,
                                  TensorD& wrt, double epsilon = 1e-6) {
  if (!analytic.same_shape(wrt))
    throw DimensionError("grad_check: analytic gradient shape " + shape_string(analytic.shape()) +
                         " does not match parameter shape " + shape_string(wrt.shape()));
  if (!(epsilon > 0)) throw ArgumentError("grad_check: epsilon must be positive");

  GradCheckResult res;
  for (int64_t i = 0; i < wrt.numel(); ++i) {
    const double saved = wrt[i];
    const double h = epsilon * std::max(1.0, std::abs(saved));
    wrt[i] = saved + h;
    const double up = loss();
    wrt[i] = saved - h;
    const double down = loss();
    wrt[i] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic[i];
    const double rel = std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
    if (rel > res.max_rel_err) {
      res.max_rel_err = rel;
      res.worst_index = i;
      res.analytic_at_worst = a;
      res.numeric_at_worst = numeric;
    }
  }
  return res;
}

} // namespace ecov
