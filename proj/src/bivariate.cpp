#include "simulstop/bivariate.hpp"

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
constexpr double kTolDouble = 1e-10;
constexpr double kMinConditioning = 1e-12;

void require_time(double s, const char* what) {
  if (!(s >= 0.0)) throw InvalidArgument(std::string(what) + " must be a nonnegative time");
}

double joint_on(const CurveSet& set, double s, double t) {
  const auto& c = set.curves;
  return std::exp(-(compensator(c[0], s) + compensator(c[1], t) +
                    compensator(c[2], std::max(s, t))));
}

double sum_at(const CurveSet& set, double s) {
  return set.curves[0].at(s) + set.curves[1].at(s) + set.curves[2].at(s);
}

// int_lo^hi alpha3 e^{-A1-A2-A3}
Result diagonal_mass(const CurveSet& set, double lo, double hi) {
  if (set.curves[2].model().identically_zero()) return {};
  auto f = [&](double s) { return set.curves[2].rate_at(s) * std::exp(-sum_at(set, s)); };
  return integrate_on(set, f, lo, hi, rate_sum(set, {0, 1, 2}), kTol);
}

// int alpha^i e^{-A^i_x - A^j_{x+eps} - A^3_{x+eps}} dx: tau_i strikes first, eps ahead.
Result lead_mass(const CurveSet& set, int i, double eps) {
  const auto& c = set.curves;
  const auto& lead = c[i];
  const auto& other = c[1 - i];
  if (lead.model().identically_zero()) return {};
  auto f = [&](double x) {
    return lead.rate_at(x) * std::exp(-lead.at(x) - other.at(x + eps) - c[2].at(x + eps));
  };
  double limit = kInf;
  for (const auto& curve : c) {
    if (curve.path_bound()) limit = std::min(limit, curve.extent() - eps);
  }
  return integrate_on(set, f, 0.0, kInf, rate_sum(set, {0, 1, 2}), kTol, limit);
}

Result first_moment_on(const CurveSet& set, int i) {
  const auto& c = set.curves;
  auto f = [&](double x) { return std::exp(-c[i].at(x) - c[2].at(x)); };
  return integrate_on(set, f, 0.0, kInf, rate_sum(set, {std::size_t(i), 2}), kTol);
}

Result second_moment_on(const CurveSet& set, int i) {
  const auto& c = set.curves;
  auto f = [&](double x) { return 2.0 * x * std::exp(-c[i].at(x) - c[2].at(x)); };
  return integrate_on(set, f, 0.0, kInf, rate_sum(set, {std::size_t(i), 2}), kTol);
}

// E[tau1 tau2] = int int P(tau1 > x, tau2 > y), split at the diagonal where A^3_{x v y}
// has its kink.
Result cross_moment_on(const CurveSet& set) {
  const auto& c = set.curves;
  if (std::isinf(set.horizon)) {
    auto lower = [&](double x, double y) { return std::exp(-c[0].at(x) - c[1].at(y) - c[2].at(y)); };
    auto upper = [&](double x, double y) { return std::exp(-c[0].at(x) - c[1].at(y) - c[2].at(x)); };
    const Result a = quadrature::integrate_double(lower, quadrature::Region::LowerTriangle, kTolDouble);
    const Result b = quadrature::integrate_double(upper, quadrature::Region::UpperTriangle, kTolDouble);
    return {a.value + b.value, a.abs_error + b.abs_error, a.evaluations + b.evaluations};
  }
  // Tabulated curves: the inner integrals factor out as running integrals.
  std::vector<double> breaks = set.breaks;
  const quadrature::CumulativeIntegral c1([&](double x) { return std::exp(-c[0].at(x)); }, breaks);
  const quadrature::CumulativeIntegral d(
      [&](double x) { return std::exp(-c[0].at(x) - c[2].at(x)); }, breaks);
  auto f = [&](double y) {
    const double lower = std::exp(-c[1].at(y) - c[2].at(y)) * c1(y);
    const double upper = std::exp(-c[1].at(y)) * (d.total() - d(y));
    return lower + upper;
  };
  Result r = integrate_on(set, f, 0.0, kInf, 0.0, kTolDouble);
  r.abs_error += set.horizon * (c1.abs_error() + d.abs_error());
  return r;
}

}  // namespace

BivariateScenario BivariateScenario::constants(double a1, double a2, double a3) {
  BivariateScenario sc;
  sc.alpha1 = IntensityModel::constant(a1);
  sc.alpha2 = IntensityModel::constant(a2);
  sc.alpha3 = IntensityModel::constant(a3);
  return sc;
}

bool BivariateScenario::depends_on_state() const {
  return alpha1.depends_on_state() || alpha2.depends_on_state() || alpha3.depends_on_state();
}

BivariateModel::BivariateModel(BivariateScenario scenario) : scenario_(std::move(scenario)) {
  const std::array<IntensityModel, 3> models = {scenario_.alpha1, scenario_.alpha2,
                                                scenario_.alpha3};
  const std::array<std::vector<std::size_t>, 2> groups = {std::vector<std::size_t>{0, 2},
                                                          std::vector<std::size_t>{1, 2}};
  if (!scenario_.depends_on_state() || scenario_.paths.empty()) {
    sets_.push_back(build_curves(models, nullptr, groups));
  } else {
    sets_.reserve(scenario_.paths.size());
    for (const auto& path : scenario_.paths) sets_.push_back(build_curves(models, &path, groups));
  }
  for (int i = 0; i < 2; ++i) {
    divergence_[i].divergent = true;
    for (std::size_t k = 0; k < sets_.size(); ++k) {
      const CompensatorCurve* pair[] = {&sets_[k].curves[i], &sets_[k].curves[2]};
      auto d = validate_divergence(std::span<const CompensatorCurve* const>(pair));
      if (!d.divergent || k == 0) divergence_[i] = d;
      if (!d.divergent) break;
    }
    defective_ = defective_ || !divergence_[i].divergent;
  }
}

const DivergenceDiagnostic& BivariateModel::divergence(int i) const {
  if (i != 1 && i != 2) throw InvalidArgument("marginal index must be 1 or 2");
  return divergence_[i - 1];
}

Value BivariateModel::average(const std::function<Result(const CurveSet&)>& per) const {
  std::vector<double> values;
  std::vector<double> errors;
  values.reserve(sets_.size());
  errors.reserve(sets_.size());
  for (const auto& set : sets_) {
    const Result r = per(set);
    values.push_back(r.value);
    errors.push_back(r.abs_error);
  }
  Value v;
  v.value = detail::mean(values);
  v.abs_error = detail::mean(errors);
  if (values.size() > 1) {
    v.ensemble_se =
        std::sqrt(detail::covariance(values, values) / static_cast<double>(values.size()));
  }
  v.defective = defective_;
  return v;
}

Value BivariateModel::ratio(
    const std::function<std::array<Result, 2>(const CurveSet&)>& per,
    double min_denominator) const {
  std::vector<double> num;
  std::vector<double> den;
  double num_err = 0.0;
  double den_err = 0.0;
  for (const auto& set : sets_) {
    const auto r = per(set);
    num.push_back(r[0].value);
    den.push_back(r[1].value);
    num_err += r[0].abs_error;
    den_err += r[1].abs_error;
  }
  const double n = static_cast<double>(num.size());
  const double mn = detail::mean(num);
  const double md = detail::mean(den);
  if (!(md >= min_denominator)) {
    throw UndefinedConditional("conditioning event has probability below 1e-12");
  }
  Value v;
  v.value = mn / md;
  v.abs_error = (num_err / n + std::abs(v.value) * den_err / n) / md;
  if (num.size() > 1) {
    const double var = detail::covariance(num, num) - 2.0 * v.value * detail::covariance(num, den) +
                       v.value * v.value * detail::covariance(den, den);
    v.ensemble_se = std::sqrt(std::max(var, 0.0) / n) / md;
  }
  v.defective = defective_;
  return v;
}

void BivariateModel::require_finite_moments() const {
  if (defective_) {
    throw NumericError("infinite moment: a marginal compensator does not diverge");
  }
}

Value BivariateModel::joint_survival(double s, double t) const {
  require_time(s, "s");
  require_time(t, "t");
  return average([&](const CurveSet& set) { return Result{joint_on(set, s, t), 0.0, 0}; });
}

Value BivariateModel::marginal_survival(int i, double s) const {
  if (i != 1 && i != 2) throw InvalidArgument("marginal index must be 1 or 2");
  require_time(s, "s");
  return i == 1 ? joint_survival(s, 0.0) : joint_survival(0.0, s);
}

Value BivariateModel::prob_equal() const {
  return average([](const CurveSet& set) { return diagonal_mass(set, 0.0, kInf); });
}

Value BivariateModel::beta() const {
  return average([](const CurveSet& set) {
    auto f = [&](double s) {
      return (set.curves[0].rate_at(s) + set.curves[1].rate_at(s)) * std::exp(-sum_at(set, s));
    };
    return integrate_on(set, f, 0.0, kInf, rate_sum(set, {0, 1, 2}), kTol);
  });
}

Value BivariateModel::singular_part(double s, double t) const {
  require_time(s, "s");
  require_time(t, "t");
  return average([&](const CurveSet& set) { return diagonal_mass(set, std::max(s, t), kInf); });
}

Decomposition BivariateModel::decompose(double s, double t) const {
  if (!deterministic()) {
    throw UnsupportedScenario("decomposition needs a deterministic clock, not a path ensemble");
  }
  const Value b = beta();
  const Value sing = singular_part(s, t);
  const Value joint = joint_survival(s, t);
  Decomposition d;
  d.beta = std::clamp(b.value, 0.0, 1.0);
  d.joint = joint.value;
  d.f_sing = d.beta < 1.0 ? sing.value / (1.0 - d.beta) : 0.0;
  d.f_aa = d.beta > 0.0 ? (joint.value - sing.value) / d.beta : 0.0;
  d.abs_error = b.abs_error + sing.abs_error;
  return d;
}

Value BivariateModel::prob_equal_and_before(double t) const {
  require_time(t, "t");
  return average([&](const CurveSet& set) { return diagonal_mass(set, 0.0, t); });
}

Value BivariateModel::prob_equal_given_tau1_before(double t) const {
  require_time(t, "t");
  if (t == 0.0) throw UndefinedConditional("conditioning on tau1 <= 0 has probability zero");
  return ratio(
      [&](const CurveSet& set) {
        const double a = set.curves[0].at(t) + set.curves[2].at(t);
        return std::array<Result, 2>{diagonal_mass(set, 0.0, t), Result{-std::expm1(-a), 0.0, 0}};
      },
      kMinConditioning);
}

Value BivariateModel::prob_equal_given_both_before(double t) const {
  require_time(t, "t");
  if (t == 0.0) throw UndefinedConditional("conditioning on both times <= 0 has probability zero");
  return ratio(
      [&](const CurveSet& set) {
        const double a1 = set.curves[0].at(t);
        const double a2 = set.curves[1].at(t);
        const double a3 = set.curves[2].at(t);
        // 1 - e^{-A3}(e^{-A2} + e^{-A1} - e^{-A1-A2}), arranged to avoid cancellation.
        const double den = -std::expm1(-a1 - a3) + std::exp(-a2 - a3) * std::expm1(-a1);
        return std::array<Result, 2>{diagonal_mass(set, 0.0, t), Result{den, 0.0, 0}};
      },
      kMinConditioning);
}

Value BivariateModel::quadrant_prob(double s, double t) const {
  require_time(s, "s");
  if (!(s < t)) throw InvalidArgument("quadrant probability needs s < t");
  return average([&](const CurveSet& set) {
    const double v = joint_on(set, s, s) + joint_on(set, t, t) - joint_on(set, s, t) -
                     joint_on(set, t, s);
    return Result{v, 0.0, 0};
  });
}

Value BivariateModel::joint_hazard_ratio(double t, double eps) const {
  require_time(t, "t");
  if (!(eps > 0.0)) throw InvalidArgument("eps must be positive");
  // Realizations are weighted by P(both > t | X); weights are rescaled by the largest one.
  std::vector<double> log_w;
  std::vector<double> ratio_r;
  for (const auto& set : sets_) {
    const auto& c = set.curves;
    double d[3];
    for (int i = 0; i < 3; ++i) {
      if (auto r = c[i].constant_rate()) {
        d[i] = *r * eps;
      } else {
        d[i] = c[i].at(t + eps) - c[i].at(t);
      }
    }
    // P(both in (t, t+eps] | both > t) = 1 - e^{-d2-d3} - e^{-d1-d3} + e^{-d1-d2-d3}
    ratio_r.push_back(-std::expm1(-d[1] - d[2]) + std::exp(-d[0] - d[2]) * std::expm1(-d[1]));
    log_w.push_back(-sum_at(set, t));
  }
  const double top = *std::max_element(log_w.begin(), log_w.end());
  std::vector<double> num;
  std::vector<double> den;
  for (std::size_t k = 0; k < sets_.size(); ++k) {
    const double w = std::exp(log_w[k] - top);
    num.push_back(w * ratio_r[k] / eps);
    den.push_back(w);
  }
  const double n = static_cast<double>(num.size());
  const double mn = detail::mean(num);
  const double md = detail::mean(den);
  Value v;
  v.value = mn / md;
  if (num.size() > 1) {
    const double var = detail::covariance(num, num) - 2.0 * v.value * detail::covariance(num, den) +
                       v.value * v.value * detail::covariance(den, den);
    v.ensemble_se = std::sqrt(std::max(var, 0.0) / n) / md;
  }
  v.defective = defective_;
  return v;
}

Value BivariateModel::prob_within_eps(double eps) const {
  if (!(eps >= 0.0)) throw InvalidArgument("eps must be nonnegative");
  if (std::isinf(eps)) return Value{1.0, 0.0, 0.0, defective_};
  return average([&](const CurveSet& set) {
    const Result a = lead_mass(set, 0, eps);
    const Result b = lead_mass(set, 1, eps);
    return Result{1.0 - a.value - b.value, a.abs_error + b.abs_error, a.evaluations + b.evaluations};
  });
}

Value BivariateModel::mean(int i) const {
  if (i != 1 && i != 2) throw InvalidArgument("marginal index must be 1 or 2");
  require_finite_moments();
  return average([&](const CurveSet& set) { return first_moment_on(set, i - 1); });
}

Value BivariateModel::second_moment(int i) const {
  if (i != 1 && i != 2) throw InvalidArgument("marginal index must be 1 or 2");
  require_finite_moments();
  return average([&](const CurveSet& set) { return second_moment_on(set, i - 1); });
}

Value BivariateModel::cross_moment() const {
  require_finite_moments();
  return average(cross_moment_on);
}

Value BivariateModel::l2_distance_sq() const {
  require_finite_moments();
  return average([](const CurveSet& set) {
    const Result a = second_moment_on(set, 0);
    const Result b = second_moment_on(set, 1);
    const Result c = cross_moment_on(set);
    return Result{a.value + b.value - 2.0 * c.value,
                  a.abs_error + b.abs_error + 2.0 * c.abs_error, 0};
  });
}

Value BivariateModel::covariance() const {
  require_finite_moments();
  std::vector<double> p;
  std::vector<double> m1;
  std::vector<double> m2;
  double err = 0.0;
  for (const auto& set : sets_) {
    const Result c = cross_moment_on(set);
    const Result a = first_moment_on(set, 0);
    const Result b = first_moment_on(set, 1);
    p.push_back(c.value);
    m1.push_back(a.value);
    m2.push_back(b.value);
    err += c.abs_error + a.abs_error * b.value + b.abs_error * a.value;
  }
  const double n = static_cast<double>(p.size());
  const double mp = detail::mean(p);
  const double ma = detail::mean(m1);
  const double mb = detail::mean(m2);
  Value v;
  v.value = mp - ma * mb;
  v.abs_error = err / n;
  if (p.size() > 1) {
    // Delta method with gradient (1, -E[tau2], -E[tau1]).
    const double var = detail::covariance(p, p) + mb * mb * detail::covariance(m1, m1) +
                       ma * ma * detail::covariance(m2, m2) - 2.0 * mb * detail::covariance(p, m1) -
                       2.0 * ma * detail::covariance(p, m2) +
                       2.0 * ma * mb * detail::covariance(m1, m2);
    v.ensemble_se = std::sqrt(std::max(var, 0.0) / n);
  }
  v.defective = defective_;
  return v;
}

Value joint_survival(const BivariateScenario& sc, double s, double t) {
  return BivariateModel(sc).joint_survival(s, t);
}

Value marginal_survival(const BivariateScenario& sc, int i, double s) {
  return BivariateModel(sc).marginal_survival(i, s);
}

Value prob_equal(const BivariateScenario& sc) { return BivariateModel(sc).prob_equal(); }

Decomposition decompose(const BivariateScenario& sc, double s, double t) {
  return BivariateModel(sc).decompose(s, t);
}

double prob_equal_constant(double a1, double a2, double a3) {
  if (!(a1 >= 0.0) || !(a2 >= 0.0) || !(a3 >= 0.0) || !(a1 + a2 + a3 > 0.0)) {
    throw InvalidArgument("constant rates must be nonnegative with a positive sum");
  }
  return a3 / (a1 + a2 + a3);
}

double prob_equal_proportional(double a1, double a2) {
  if (!(a1 > 0.0) || !(a2 > 0.0)) throw InvalidArgument("proportional factors must be positive");
  return 1.0 / (a1 + a2 + 1.0);
}

// ---------------------------------------------------------------------------------------
// Bounds

namespace {

void check_pair(double l, double u) {
  if (!(l > 0.0) || !(u >= l) || !std::isfinite(u)) {
    throw InvalidArgument("bound spec needs 0 < l <= u < inf");
  }
}

}  // namespace

BoundSpec BoundSpec::bounded_intensity(std::array<double, 3> l, std::array<double, 3> u,
                                       std::optional<IntensityModel> beta_shape) {
  for (int i = 0; i < 3; ++i) check_pair(l[i], u[i]);
  BoundSpec s;
  s.kind = Kind::BoundedIntensity;
  s.lower = l;
  s.upper = u;
  s.beta_shape = std::move(beta_shape);
  return s;
}

BoundSpec BoundSpec::bounded_sum_compensators(double l, double u) {
  check_pair(l, u);
  BoundSpec s;
  s.kind = Kind::BoundedSumCompensators;
  s.lower = {l, 0.0, 0.0};
  s.upper = {u, 0.0, 0.0};
  return s;
}

BoundSpec BoundSpec::compensator_ratio(double l, double u) {
  check_pair(l, u);
  BoundSpec s;
  s.kind = Kind::CompensatorRatio;
  s.lower = {l, 0.0, 0.0};
  s.upper = {u, 0.0, 0.0};
  return s;
}

BoundSpec BoundSpec::intensity_vs_sum(double l, double u) {
  check_pair(l, u);
  if (!(u < l + 1.0)) throw InvalidArgument("intensity_vs_sum needs u < l + 1");
  BoundSpec s;
  s.kind = Kind::IntensityVsSum;
  s.lower = {l, 0.0, 0.0};
  s.upper = {u, 0.0, 0.0};
  return s;
}

Bounds prob_equal_bounds(const BoundSpec& spec) {
  const auto& l = spec.lower;
  const auto& u = spec.upper;
  switch (spec.kind) {
    case BoundSpec::Kind::BoundedIntensity:
      for (int i = 0; i < 3; ++i) check_pair(l[i], u[i]);
      return {l[2] / (u[0] + u[1] + u[2]), u[2] / (l[0] + l[1] + l[2])};
    case BoundSpec::Kind::BoundedSumCompensators:
      check_pair(l[0], u[0]);
      return {std::exp(-u[0]), std::exp(-l[0])};
    case BoundSpec::Kind::CompensatorRatio:
      check_pair(l[0], u[0]);
      return {1.0 / (u[0] + 1.0), 1.0 / (l[0] + 1.0)};
    case BoundSpec::Kind::IntensityVsSum:
      check_pair(l[0], u[0]);
      if (!(u[0] < l[0] + 1.0)) throw InvalidArgument("intensity_vs_sum needs u < l + 1");
      return {l[0] / (u[0] + 1.0), u[0] / (l[0] + 1.0)};
  }
  throw InvalidArgument("unknown bound kind");
}

bool satisfies_bound(const BoundSpec& spec, const BivariateModel& model,
                     std::span<const double> times) {
  constexpr double kSlack = 1e-9;
  const auto& l = spec.lower;
  const auto& u = spec.upper;
  const auto& paths = model.scenario().paths;
  const auto& sets = model.realizations();
  for (std::size_t k = 0; k < sets.size(); ++k) {
    const auto& c = sets[k].curves;
    std::optional<CompensatorCurve> beta;
    if (spec.kind == BoundSpec::Kind::BoundedIntensity && spec.beta_shape) {
      const StatePath* path =
          model.scenario().depends_on_state() && !paths.empty() ? &paths[k] : nullptr;
      beta.emplace(*spec.beta_shape, path, std::max(1.0, times.empty() ? 1.0 : times.back()));
    }
    for (double t : times) {
      const double r[3] = {c[0].rate_at(t), c[1].rate_at(t), c[2].rate_at(t)};
      const double a[3] = {c[0].at(t), c[1].at(t), c[2].at(t)};
      switch (spec.kind) {
        case BoundSpec::Kind::BoundedIntensity:
          if (beta) {
            const double b = beta->rate_at(t);
            for (int i = 0; i < 3; ++i) {
              if (r[i] < l[i] * b * (1.0 - kSlack) || r[i] > u[i] * b * (1.0 + kSlack)) return false;
            }
          } else {
            // Some b works iff max_i r_i / u_i <= min_i r_i / l_i.
            double lo = 0.0;
            double hi = kInf;
            for (int i = 0; i < 3; ++i) {
              lo = std::max(lo, r[i] / u[i]);
              hi = std::min(hi, r[i] / l[i]);
            }
            if (lo > hi * (1.0 + kSlack)) return false;
          }
          break;
        case BoundSpec::Kind::BoundedSumCompensators:
          if (r[2] > 0.0 && (a[0] + a[1] < l[0] * (1.0 - kSlack) || a[0] + a[1] >= u[0])) {
            return false;
          }
          break;
        case BoundSpec::Kind::CompensatorRatio:
          if (a[0] + a[1] < l[0] * a[2] * (1.0 - kSlack) || a[0] + a[1] > u[0] * a[2] * (1.0 + kSlack)) {
            return false;
          }
          break;
        case BoundSpec::Kind::IntensityVsSum:
          if (r[2] < l[0] * (r[0] + r[1]) * (1.0 - kSlack) ||
              r[2] > u[0] * (r[0] + r[1]) * (1.0 + kSlack)) {
            return false;
          }
          break;
      }
    }
  }
  return true;
}

}  // namespace simulstop
