#include "simulstop/gumbel.hpp"

#include <algorithm>
#include <cmath>

#include "detail.hpp"
#include "simulstop/error.hpp"

namespace simulstop {

namespace {

using detail::compensator;
using detail::integrate_on;
using detail::kInf;
using detail::rate_sum;
using quadrature::Result;

constexpr double kTol = 1e-12;

void check_delta(double delta) {
  if (!(delta >= 0.0 && delta <= 1.0)) throw InvalidArgument("delta must lie in [0, 1]");
}

void check_rates(double l1, double l2, double l3) {
  if (!(l1 > 0.0 && l2 > 0.0 && l3 >= 0.0) || !std::isfinite(l1 + l2 + l3)) {
    throw InvalidArgument("need l1, l2 > 0 and l3 >= 0, all finite");
  }
}

// int_0^inf e^{-v(2k + v)} g(v) dv
Result completed_square(double k, const quadrature::Fn1& g) {
  quadrature::Budget budget;
  auto f = [&](double v) { return std::exp(-v * (2.0 * k + v)) * g(v); };
  return quadrature::integrate_from({f, 2.0 * k > 0.0 ? std::optional<double>(2.0 * k) : std::nullopt},
                                    0.0, 1e-13, budget);
}

}  // namespace

GumbelModel::GumbelModel(GumbelScenario scenario)
    : scenario_((check_delta(scenario.delta), std::move(scenario))), base_(scenario_.base) {}

Value GumbelModel::joint_survival(double s, double t) const {
  if (!(s >= 0.0 && t >= 0.0)) throw InvalidArgument("times must be nonnegative");
  const double d = scenario_.delta;
  return base_.average([&](const CurveSet& set) {
    const auto& c = set.curves;
    const double a1 = compensator(c[0], s);
    const double a2 = compensator(c[1], t);
    const double cross = (a1 == 0.0 || a2 == 0.0) ? 0.0 : d * a1 * a2;
    return Result{std::exp(-(a1 + a2 + cross + compensator(c[2], std::max(s, t)))), 0.0, 0};
  });
}

Value GumbelModel::marginal_survival(int i, double s) const { return base_.marginal_survival(i, s); }

Value GumbelModel::prob_equal() const {
  const double d = scenario_.delta;
  return base_.average([&](const CurveSet& set) -> Result {
    const auto& c = set.curves;
    if (c[2].model().identically_zero()) return {};
    auto f = [&](double s) {
      const double a1 = c[0].at(s);
      const double a2 = c[1].at(s);
      return c[2].rate_at(s) * std::exp(-(a1 + a2 + c[2].at(s)) - d * a1 * a2);
    };
    return integrate_on(set, f, 0.0, kInf, rate_sum(set, {0, 1, 2}), kTol);
  });
}

Domination gumbel_prob_equal_dominated(double l1, double l2, double l3, double delta) {
  check_rates(l1, l2, l3);
  if (!(delta > 0.0 && delta <= 1.0)) throw InvalidArgument("delta must lie in (0, 1]");
  const double root = std::sqrt(delta * l1 * l2);
  const double k = (l1 + l2 + l3) / (2.0 * root);
  const Result r = completed_square(k, [](double) { return 1.0; });
  return {l3 / root * r.value, prob_equal_constant(l1, l2, l3)};
}

Value gumbel_covariance_constant(double l1, double l2, double l3) {
  check_rates(l1, l2, l3);
  const double root = std::sqrt(l1 * l2);
  const double k = (l1 + l2 + l3) / (2.0 * root);
  // E[tau1 tau2] = I(l1, l2) + I(l2, l1), u = sqrt(l1 l2) x + k, u = k + v.
  auto reduced = [&](double a, double b) {
    return completed_square(k, [&](double v) { return 1.0 / (2.0 * root * (k + v) + b + l3 - a); });
  };
  const Result i1 = reduced(l1, l2);
  const Result i2 = reduced(l2, l1);
  const double cross = 2.0 / root * (i1.value + i2.value);
  Value out;
  out.value = cross - 1.0 / ((l1 + l3) * (l2 + l3));
  out.abs_error = 2.0 / root * (i1.abs_error + i2.abs_error);
  return out;
}

bool neg_cov_condition(double c1, double c2) {
  if (!(c1 > 0.0 && c2 > 0.0)) throw InvalidArgument("ratios must be positive");
  return 5.0 * c1 * c2 >= 4.0 * (c1 + c2 + 1.0);
}

double erfc_bound_h(double x, double ell) {
  if (!(x >= 1.0) || !std::isfinite(x)) throw InvalidArgument("x must be finite and >= 1");
  if (!(ell > 0.0) || !std::isfinite(ell)) throw InvalidArgument("ell must be positive");
  // int_x^inf e^{-u^2} du = e^{-x^2} int_0^inf e^{-2xv - v^2} dv
  const double tail = completed_square(x, [](double) { return 1.0; }).value;
  return std::exp(-x * x) * (2.0 * x / (4.0 * x * x + ell) - tail);
}

double erfc_bound_ell_star() {
  // h(1, .) is decreasing; keep the side where h(1, ell) >= 0.
  double lo = 0.5, hi = 2.0;
  while (hi - lo > 1e-12) {
    const double mid = 0.5 * (lo + hi);
    (erfc_bound_h(1.0, mid) >= 0.0 ? lo : hi) = mid;
  }
  return lo;
}

ErfcBoundReport erfc_bound_optimize(std::optional<double> ell_override) {
  ErfcBoundReport rep;
  rep.ell = ell_override ? *ell_override : erfc_bound_ell_star();
  const double ell = rep.ell;
  if (!(ell > 0.0 && ell < 2.0)) throw InvalidArgument("ell must lie in (0, 2)");

  auto h = [ell](double x) { return erfc_bound_h(x, ell); };
  const double guess = std::sqrt((ell * ell + 2.0 * ell) / (8.0 - 4.0 * ell));
  double a = std::max(1.0, guess - 0.5), b = std::max(1.0, guess) + 0.5;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  double hc = h(c), hd = h(d);
  while (b - a > 1e-10) {
    if (hc > hd) {
      b = d, d = c, hd = hc;
      c = b - g * (b - a), hc = h(c);
    } else {
      a = c, c = d, hc = hd;
      d = a + g * (b - a), hd = h(d);
    }
  }
  rep.x_star = 0.5 * (a + b);
  rep.h_max = h(rep.x_star);

  rep.feasible = true;
  constexpr int kGrid = 10000;
  for (int i = 0; i <= kGrid && rep.feasible; ++i) {
    rep.feasible = h(1.0 + 9.0 * i / kGrid) >= -1e-12;
  }
  return rep;
}

}  // namespace simulstop
