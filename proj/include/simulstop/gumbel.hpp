#pragma once

#include <optional>

#include "simulstop/bivariate.hpp"

namespace simulstop {

// (Z1, Z2) Gumbel bivariate exponential with survival e^{-s-t-delta s t}; Z3 independent.
struct GumbelScenario {
  BivariateScenario base;
  double delta = 0.0;  // in [0, 1]
};

class GumbelModel {
 public:
  explicit GumbelModel(GumbelScenario scenario);

  const GumbelScenario& scenario() const noexcept { return scenario_; }
  const BivariateModel& base() const noexcept { return base_; }
  double delta() const noexcept { return scenario_.delta; }

  // E exp(-A1_s - A2_t - delta A1_s A2_t - A3_{s v t})
  Value joint_survival(double s, double t) const;
  Value marginal_survival(int i, double s) const;
  // E int alpha3 exp(-(A1 + A2 + A3) - delta A1 A2)
  Value prob_equal() const;

 private:
  GumbelScenario scenario_;
  BivariateModel base_;
};

struct Domination {
  double value = 0.0;     // P(tau1 = tau2) under delta
  double mo_value = 0.0;  // the same at delta = 0: l3 / (l1 + l2 + l3)
};

// Constant intensities, delta in (0, 1], via the completed square.
Domination gumbel_prob_equal_dominated(double l1, double l2, double l3, double delta);

// Cov(tau1, tau2) for constant intensities at delta = 1 from the two reduced single
// integrals of the completed square.
Value gumbel_covariance_constant(double l1, double l2, double l3);

// 5 c1 c2 >= 4 (c1 + c2 + 1): sufficient for negative covariance at delta = 1 when
// l1 = c1 l3 and l2 = c2 l3.
bool neg_cov_condition(double c1, double c2);

// h(x, l) = 2x / (4x^2 + l) e^{-x^2} - int_x^inf e^{-u^2} du, for x >= 1.
double erfc_bound_h(double x, double ell);

struct ErfcBoundReport {
  double ell = 0.0;
  double x_star = 0.0;
  double h_max = 0.0;
  bool feasible = false;  // h(x, ell) >= -1e-12 on a dense grid of [1, 10]
};

// Root of h(1, ell) = 0 by bisection on [0.5, 2], rounded toward h(1, ell) >= 0.
double erfc_bound_ell_star();

// Without an override, ell is the root of h(1, ell) = 0 found by bisection on [0.5, 2].
ErfcBoundReport erfc_bound_optimize(std::optional<double> ell_override = std::nullopt);

}  // namespace simulstop
