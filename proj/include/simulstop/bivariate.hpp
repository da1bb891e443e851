#pragma once

#include <array>
#include <functional>
#include <optional>
#include <vector>

#include "simulstop/intensity.hpp"
#include "simulstop/quadrature.hpp"

namespace simulstop {

// tau_i = min(eta_i, eta_3) with eta_j = inf{s : A^j_s >= Z_j}.
//
// paths empty: the clock is X_t = t. One path: the law conditional on that realization.
// Several paths: an ensemble whose average stands in for the expectation over X.
struct BivariateScenario {
  IntensityModel alpha1 = IntensityModel::constant(1.0);
  IntensityModel alpha2 = IntensityModel::constant(1.0);
  IntensityModel alpha3 = IntensityModel::constant(1.0);
  std::vector<StatePath> paths;

  static BivariateScenario constants(double a1, double a2, double a3);
  bool depends_on_state() const;
};

// Analytic result. ensemble_se is zero unless the scenario averages over several paths;
// defective is set when a marginal compensator does not diverge.
struct Value {
  double value = 0.0;
  double abs_error = 0.0;
  double ensemble_se = 0.0;
  bool defective = false;
};

struct Decomposition {
  double beta = 0.0;
  double f_aa = 0.0;    // 0 when beta = 0
  double f_sing = 0.0;  // 0 when beta = 1
  double joint = 0.0;
  double abs_error = 0.0;
};

// Scenario with its compensators tabulated once per realization.
class BivariateModel {
 public:
  explicit BivariateModel(BivariateScenario scenario);

  const BivariateScenario& scenario() const noexcept { return scenario_; }
  const std::vector<CurveSet>& realizations() const noexcept { return sets_; }
  bool deterministic() const noexcept { return sets_.size() == 1; }
  bool defective() const noexcept { return defective_; }
  const DivergenceDiagnostic& divergence(int i) const;  // marginal i in {1, 2}

  Value joint_survival(double s, double t) const;
  Value marginal_survival(int i, double s) const;
  Value prob_equal() const;
  Value beta() const;
  // (1 - beta) F_sing(s, t): mass of the diagonal beyond max(s, t).
  Value singular_part(double s, double t) const;
  Decomposition decompose(double s, double t) const;
  Value prob_equal_and_before(double t) const;
  Value prob_equal_given_tau1_before(double t) const;
  Value prob_equal_given_both_before(double t) const;
  Value quadrant_prob(double s, double t) const;
  Value joint_hazard_ratio(double t, double eps) const;
  Value prob_within_eps(double eps) const;
  Value mean(int i) const;
  Value second_moment(int i) const;
  Value cross_moment() const;  // E[tau1 tau2]
  Value l2_distance_sq() const;
  Value covariance() const;

  // Average of a per-realization quantity; the quadrature error is averaged alongside.
  Value average(const std::function<quadrature::Result(const CurveSet&)>& per) const;
  // E[num] / E[den] over the ensemble, with a delta-method standard error.
  Value ratio(const std::function<std::array<quadrature::Result, 2>(const CurveSet&)>& per,
              double min_denominator) const;

 private:
  void require_finite_moments() const;

  BivariateScenario scenario_;
  std::vector<CurveSet> sets_;
  std::array<DivergenceDiagnostic, 2> divergence_;
  bool defective_ = false;
};

// One-shot wrappers; build a BivariateModel when evaluating many quantities.
Value joint_survival(const BivariateScenario& sc, double s, double t);
Value marginal_survival(const BivariateScenario& sc, int i, double s);
Value prob_equal(const BivariateScenario& sc);
Decomposition decompose(const BivariateScenario& sc, double s, double t);

// alpha3 / (alpha1 + alpha2 + alpha3).
double prob_equal_constant(double a1, double a2, double a3);
// alpha^i = a_i alpha^3 for an arbitrary base alpha^3: 1 / (a1 + a2 + 1).
double prob_equal_proportional(double a1, double a2);

struct BoundSpec {
  enum class Kind {
    BoundedIntensity,        // l_i b(X) <= alpha^i <= u_i b(X)
    BoundedSumCompensators,  // l <= A^1 + A^2 < u
    CompensatorRatio,        // l A^3 <= A^1 + A^2 <= u A^3
    IntensityVsSum,          // l (alpha^1 + alpha^2) <= alpha^3 <= u (alpha^1 + alpha^2)
  };
  Kind kind = Kind::BoundedSumCompensators;
  std::array<double, 3> lower{};  // scalar kinds use lower[0], upper[0]
  std::array<double, 3> upper{};
  // Dominating shape b for BoundedIntensity; the bounds themselves do not depend on it.
  std::optional<IntensityModel> beta_shape;

  static BoundSpec bounded_intensity(std::array<double, 3> l, std::array<double, 3> u,
                                     std::optional<IntensityModel> beta_shape = std::nullopt);
  static BoundSpec bounded_sum_compensators(double l, double u);
  static BoundSpec compensator_ratio(double l, double u);
  static BoundSpec intensity_vs_sum(double l, double u);
};

struct Bounds {
  double lower = 0.0;
  double upper = 1.0;
};

Bounds prob_equal_bounds(const BoundSpec& spec);

// Checks the hypotheses of spec along every realization of the scenario at the given
// times. For BoundedSumCompensators the check runs on the support of alpha3.
bool satisfies_bound(const BoundSpec& spec, const BivariateModel& model,
                     std::span<const double> times);

}  // namespace simulstop
