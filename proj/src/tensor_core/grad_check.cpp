#include "vsegan/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "vsegan/rng.hpp"

namespace vsegan {

namespace {

std::vector<std::size_t> pick_entries(std::size_t n, std::size_t max_entries, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (max_entries == 0 || max_entries >= n) return idx;
  rng.shuffle(idx.begin(), idx.end());
  idx.resize(max_entries);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

GradCheckReport compare_with_finite_differences(const std::function<double()>& loss,
                                                const std::vector<NamedParam<double>>& params,
                                                const std::vector<Tensor<double>>& analytic,
                                                const GradCheckOptions& options) {
  require(analytic.size() == params.size(), "grad_check: one analytic gradient per parameter required");
  GradCheckReport report;
  report.tolerance = options.tolerance;
  Rng rng(options.seed);
  NoGradGuard no_grad;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Var<double> var = params[p].var;
    Tensor<double>& x = var.mutable_value();
    const Tensor<double>& a = analytic[p];
    require(a.empty() || a.shape() == x.shape(), "grad_check: analytic shape mismatch for " + params[p].name);
    ParamGradError err{params[p].name, 0.0, 0};
    for (std::size_t i : pick_entries(x.size(), options.max_entries, rng)) {
      const double orig = x[i];
      const double h = 1e-5 * std::max(1.0, std::abs(orig));
      x[i] = orig + h;
      const double fp = loss();
      x[i] = orig - h;
      const double fm = loss();
      x[i] = orig;
      const double numeric = (fp - fm) / (2 * h);
      const double ana = a.empty() ? 0.0 : a[i];
      const double denom = std::max({std::abs(ana), std::abs(numeric), options.abs_floor});
      const double rel = std::abs(ana - numeric) / denom;
      err.max_rel_error = std::max(err.max_rel_error, std::isfinite(rel) ? rel : INFINITY);
      ++err.checked;
    }
    report.params.push_back(err);
  }
  return report;
}

GradCheckReport grad_check(const std::function<Var<double>()>& loss, const std::vector<NamedParam<double>>& params,
                           const GradCheckOptions& options) {
  for (const auto& p : params) {
    Var<double> v = p.var;
    v.zero_grad();
    v.set_requires_grad(true);
  }
  {
    Var<double> l = loss();
    l.backward();
  }
  std::vector<Tensor<double>> analytic;
  for (const auto& p : params) analytic.push_back(p.var.grad());
  return compare_with_finite_differences([&loss] { return loss().item(); }, params, analytic, options);
}

}  // namespace vsegan
