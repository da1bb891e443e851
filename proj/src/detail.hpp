#pragma once

// Internal helpers shared by the analytic modules.

#include <cmath>
#include <initializer_list>
#include <limits>
#include <span>
#include <vector>

#include "simulstop/error.hpp"
#include "simulstop/intensity.hpp"
#include "simulstop/quadrature.hpp"

namespace simulstop::detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Pairwise summation in index order; reproducible for a fixed input ordering.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

inline double mean(std::span<const double> v) {
  return v.empty() ? 0.0 : pairwise_sum(v) / static_cast<double>(v.size());
}

// Sample covariance of two equally long series (n - 1 denominator).
inline double covariance(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  if (n < 2) return 0.0;
  const double ma = mean(a);
  const double mb = mean(b);
  std::vector<double> prod(n);
  for (std::size_t i = 0; i < n; ++i) prod[i] = (a[i] - ma) * (b[i] - mb);
  return pairwise_sum(prod) / static_cast<double>(n - 1);
}

// A(s) extended to s = inf for identity clocks and closed forms.
inline double compensator(const CompensatorCurve& c, double s) {
  if (std::isinf(s)) {
    if (auto r = c.constant_rate()) return *r > 0.0 ? kInf : 0.0;
    if (c.path_bound()) throw HorizonExceeded("time beyond the state path horizon");
    return validate_divergence(c).divergent ? kInf : c.at(c.extent());
  }
  return c.at(s);
}

inline double total_compensator(const CurveSet& set, double s) {
  double total = 0.0;
  for (const auto& c : set.curves) total += compensator(c, s);
  return total;
}

// Integral of f over [lo, hi] for one realization, hi possibly infinite. Closed-form sets
// use the semi-infinite rule with the given decay rate. Tabulated sets stop at the group
// horizon (or at `limit`, past which f cannot be evaluated) and add the bound
// exp(-total compensator) on the neglected tail.
inline quadrature::Result integrate_on(const CurveSet& set, const quadrature::Fn1& f, double lo,
                                       double hi, double decay, double tol,
                                       double limit = kInf) {
  quadrature::Budget budget;
  if (std::isinf(hi) && std::isinf(set.horizon) && std::isinf(limit)) {
    return quadrature::integrate_from(
        {f, decay > 0.0 ? std::optional<double>(decay) : std::nullopt}, lo, tol, budget);
  }
  const double end = std::min(std::isinf(hi) ? set.horizon : hi, limit);
  const bool truncated = end < hi;
  if (!(end > lo)) {
    return {0.0, truncated ? std::exp(-total_compensator(set, std::max(lo, 0.0))) : 0.0, 0};
  }
  std::vector<double> breaks{lo};
  for (double b : set.breaks) {
    if (b > lo && b < end) breaks.push_back(b);
  }
  breaks.push_back(end);
  auto r = quadrature::integrate_partitioned(f, breaks, tol, budget);
  if (truncated) r.abs_error += std::exp(-total_compensator(set, end));
  return r;
}

// Sum of the constant rates of the listed curves; the decay rate of exp(-sum A).
inline double rate_sum(const CurveSet& set, std::initializer_list<std::size_t> idx) {
  double r = 0.0;
  for (std::size_t i : idx) r += set.curves[i].constant_rate().value_or(0.0);
  return r;
}

}  // namespace simulstop::detail
