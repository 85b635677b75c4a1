#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "vsegan/params.hpp"

namespace vsegan {

struct GradCheckOptions {
  double tolerance = 1e-6;
  // Denominator floor for the relative error |a-n| / max(|a|, |n|, floor).
  double abs_floor = 1e-8;
  // Entries checked per parameter; 0 checks every entry.
  std::size_t max_entries = 0;
  std::uint64_t seed = 0;
};

struct ParamGradError {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t checked = 0;
};

struct GradCheckReport {
  double tolerance = 0.0;
  std::vector<ParamGradError> params;

  double max_rel_error() const {
    double m = 0.0;
    for (const auto& p : params) m = std::max(m, p.max_rel_error);
    return m;
  }
  bool passed() const { return max_rel_error() < tolerance; }
};

// Central differences with h = 1e-5 * max(1, |x|) against the reverse-mode
// gradient of `loss` w.r.t. `params`. `loss` must be a pure function of the
// current parameter values. Failures are reported, never thrown.
GradCheckReport grad_check(const std::function<Var<double>()>& loss, const std::vector<NamedParam<double>>& params,
                           const GradCheckOptions& options);

// Same comparison with externally supplied analytic gradients (for example
// from a 32-bit model sharing the same values); `loss` is the 64-bit scalar.
GradCheckReport compare_with_finite_differences(const std::function<double()>& loss,
                                                const std::vector<NamedParam<double>>& params,
                                                const std::vector<Tensor<double>>& analytic,
                                                const GradCheckOptions& options);

}  // namespace vsegan
