#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>
#include <string>

#include "simulstop/error.hpp"
#include "simulstop/montecarlo.hpp"
#include "simulstop/quadrature.hpp"

using namespace simulstop;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr std::uint64_t kN = 1000000;

EstimateOptions seeded(std::uint64_t seed) { return EstimateOptions{seed, 64, 0}; }

bool within_3se(const EstimateWithCI& e, double expected) {
  return std::abs(e.mean - expected) <= 3.0 * e.std_error;
}

StatePath clock_path(double horizon, double dt) {
  const auto n = static_cast<std::size_t>(std::llround(horizon / dt));
  std::vector<double> grid(n + 1), values(n + 1);
  for (std::size_t k = 0; k <= n; ++k) grid[k] = values[k] = horizon * static_cast<double>(k) / n;
  return StatePath(grid, values);
}

}  // namespace

TEST_CASE("inverse compensator draws") {
  CHECK(sample_eta(CompensatorCurve(IntensityModel::constant(2.0)), 1.0) == 0.5);
  const auto linear = IntensityModel::path_driven(Shape::affine(0.0, 1.0));
  CHECK_THAT(sample_eta(CompensatorCurve(linear), 2.0), WithinAbs(2.0, 1e-11));
  const auto path = clock_path(4.0, 0.01);
  CHECK_THAT(sample_eta(CompensatorCurve(linear, &path), 2.0), WithinAbs(2.0, 1e-11));
  // A(4) = 8 on this path.
  CHECK_THROWS_AS(sample_eta(CompensatorCurve(linear, &path), 9.0), HorizonExceeded);
  CHECK_THROWS_AS(sample_eta(CompensatorCurve(linear), 0.0), InvalidArgument);

  std::vector<double> xs;
  xs.reserve(kN);
  const CompensatorCurve unit(IntensityModel::constant(1.0));
  for (std::uint64_t k = 0; k < kN; ++k) {
    SplitMix64 gen(RngSpec{3, k});
    xs.push_back(sample_eta(unit, gen.exponential()));
  }
  CHECK(ks_statistic(xs, [](double x) { return -std::expm1(-x); }) < ks_critical_1pct(kN));
}

TEST_CASE("generator streams are reproducible and distinct") {
  SplitMix64 a(RngSpec{42, 7}), b(RngSpec{42, 7}), c(RngSpec{42, 8});
  const auto x = a.next();
  CHECK(x == b.next());
  CHECK(x != c.next());
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK((u > 0.0 && u < 1.0));
  }
}

TEST_CASE("Marshall-Olkin pair frequencies") {
  for (auto [a, expected] : {std::pair{std::array{1.0, 1.0, 1.0}, 1.0 / 3.0}, {{2.0, 3.0, 5.0}, 0.5}}) {
    const PairSampler s(BivariateScenario::constants(a[0], a[1], a[2]));
    const auto e = estimate([&](RngSpec r) { return s.draw(r).equal ? 1.0 : 0.0; }, kN, seeded(1));
    CHECK(within_3se(e, expected));
    CHECK(s.ties() == 0);
  }
  const PairSampler s(BivariateScenario::constants(1, 2, 3));
  const auto surv = estimate([&](RngSpec r) { return s.draw(r).tau1 > 1.0 ? 1.0 : 0.0; }, kN, seeded(2));
  CHECK(within_3se(surv, std::exp(-4.0)));
}

TEST_CASE("equality is exact and cause codes are consistent") {
  const PairSampler s(BivariateScenario::constants(0.7, 1.3, 0.9));
  for (std::uint64_t k = 0; k < 200000; ++k) {
    const auto p = s.draw(RngSpec{9, k});
    if (p.equal) {
      CHECK(p.tau1 == p.tau2);
      CHECK(p.cause1 == Cause::Common);
    } else {
      CHECK(p.tau1 != p.tau2);
      CHECK_FALSE((p.cause1 == Cause::Common && p.cause2 == Cause::Common));
    }
    CHECK((p.cause1 == Cause::Shock1 || p.cause1 == Cause::Common));
    CHECK((p.cause2 == Cause::Shock2 || p.cause2 == Cause::Common));
  }
  CHECK(s.ties() == 0);
}

TEST_CASE("estimates: binomial CI, L2 and within-eps") {
  const BivariateModel mo(BivariateScenario::constants(1, 1, 1));
  const PairSampler s(mo.scenario());
  const auto e = estimate([&](RngSpec r) { return s.draw(r).equal ? 1.0 : 0.0; }, kN, seeded(11));
  CHECK_THAT(e.mean, WithinAbs(1.0 / 3.0, 3.0 * e.std_error));
  CHECK_THAT(e.ci99_halfwidth, WithinRel(2.576 * std::sqrt(2.0 / 9.0) / 1000.0, 0.01));
  CHECK(e.ci99_halfwidth == 2.576 * e.std_error);
  CHECK(e.n == kN);

  const PairSampler indep(BivariateScenario::constants(1, 1, 0));
  const auto l2 = estimate(
      [&](RngSpec r) {
        const auto p = indep.draw(r);
        return (p.tau1 - p.tau2) * (p.tau1 - p.tau2);
      },
      kN, seeded(12));
  CHECK(within_3se(l2, 2.0));

  const auto near = estimate(
      [&](RngSpec r) {
        const auto p = s.draw(r);
        return std::abs(p.tau1 - p.tau2) <= 0.5 ? 1.0 : 0.0;
      },
      kN, seeded(13));
  CHECK(within_3se(near, mo.prob_within_eps(0.5).value));
  CHECK(within_3se(near, 1.0 - 2.0 / 3.0 * std::exp(-1.0)));
  CHECK_THROWS_AS(estimate([](RngSpec) { return 0.0; }, 99, seeded(0)), InvalidArgument);
}

TEST_CASE("conditional frequencies match the analytic conditionals") {
  const BivariateModel mo(BivariateScenario::constants(0.8, 1.2, 0.6));
  const PairSampler s(mo.scenario());
  const double t = 0.7;
  const auto given1 = estimate_ratio(
      [&](RngSpec r) {
        const auto p = s.draw(r);
        const double hit = p.tau1 <= t ? 1.0 : 0.0;
        return std::array{p.equal ? hit : 0.0, hit};
      },
      kN, seeded(21));
  CHECK(within_3se(given1, mo.prob_equal_given_tau1_before(t).value));
  const auto both = estimate_ratio(
      [&](RngSpec r) {
        const auto p = s.draw(r);
        const double hit = (p.tau1 <= t && p.tau2 <= t) ? 1.0 : 0.0;
        return std::array{p.equal ? hit : 0.0, hit};
      },
      kN, seeded(22));
  CHECK(within_3se(both, mo.prob_equal_given_both_before(t).value));
  CHECK_THROWS_AS(estimate_ratio([](RngSpec) { return std::array{0.0, 0.0}; }, 100, seeded(0)),
                  UndefinedConditional);
}

TEST_CASE("covariance estimate on the Marshall-Olkin model") {
  const BivariateModel mo(BivariateScenario::constants(1, 1, 1));
  const PairSampler s(mo.scenario());
  const auto cov = estimate_covariance(
      [&](RngSpec r) {
        const auto p = s.draw(r);
        return std::array{p.tau1, p.tau2};
      },
      kN, seeded(31));
  CHECK(within_3se(cov, mo.covariance().value));
  CHECK_THAT(mo.covariance().value, WithinAbs(1.0 / 12.0, 1e-9));
}

TEST_CASE("reproducibility and chunk invariance") {
  const PairSampler s(BivariateScenario::constants(1, 2, 0.5));
  auto f = [&](RngSpec r) { return s.draw(r).tau1; };
  const auto a = estimate(f, 100000, {5, 64, 1});
  const auto b = estimate(f, 100000, {5, 64, 1});
  const auto threaded = estimate(f, 100000, {5, 64, 4});
  CHECK(a.mean == b.mean);
  CHECK(a.std_error == b.std_error);
  CHECK(a.mean == threaded.mean);
  CHECK(a.std_error == threaded.std_error);
  for (std::size_t chunks : {1u, 7u, 1000u}) {
    const auto c = estimate(f, 100000, {5, chunks, 1});
    CHECK_THAT(c.mean, WithinRel(a.mean, 1e-13));
    CHECK_THAT(c.std_error, WithinRel(a.std_error, 1e-10));
  }
  CHECK(estimate(f, 100000, {6, 64, 1}).mean != a.mean);
}

TEST_CASE("Gumbel conditional sampler") {
  // Inverse of the conditional survival.
  for (double s : {0.0, 0.3, 2.0, 10.0})
    for (double delta : {0.0, 0.4, 1.0})
      for (double u : {1e-12, 0.01, 0.5, 0.999999}) {
        const double t = gumbel_conditional_inverse(s, u, delta);
        CHECK_THAT((1.0 + delta * t) * std::exp(-t * (1.0 + delta * s)), WithinRel(u, 1e-10));
      }
  // The conditional survival integrates against the Exp(1) density of Z1 to the joint law.
  for (double delta : {0.3, 1.0})
    for (double s : {0.0, 0.5, 2.0})
      for (double t : {0.1, 1.0, 3.0}) {
        const double integral =
            quadrature::integrate_semi_infinite(
                {[=](double x) {
                   return std::exp(-(x + s)) * (1.0 + delta * t) * std::exp(-t * (1.0 + delta * (x + s)));
                 },
                 std::nullopt},
                1e-13)
                .value;
        CHECK_THAT(integral, WithinAbs(std::exp(-s - t - delta * s * t), 1e-12));
      }
}

TEST_CASE("Gumbel pair sampling") {
  const auto mo_sc = BivariateScenario::constants(1.0, 2.0, 0.5);
  const PairSampler mo(mo_sc);
  const PairSampler g0(GumbelScenario{mo_sc, 0.0});
  const std::uint64_t n = 200000;
  std::vector<double> a1, a2, b1, b2;
  double eq_a = 0.0, eq_b = 0.0;
  for (std::uint64_t k = 0; k < n; ++k) {
    const auto p = mo.draw(RngSpec{100, k});
    const auto q = g0.draw(RngSpec{200, k});
    a1.push_back(p.tau1), a2.push_back(p.tau2), b1.push_back(q.tau1), b2.push_back(q.tau2);
    eq_a += p.equal, eq_b += q.equal;
  }
  CHECK(ks_statistic(a1, b1) < ks_critical_1pct(n, n));
  CHECK(ks_statistic(a2, b2) < ks_critical_1pct(n, n));
  const double pa = eq_a / n, pb = eq_b / n;
  const double pooled = 0.5 * (pa + pb);
  CHECK(std::abs(pa - pb) < 2.576 * std::sqrt(2.0 * pooled * (1.0 - pooled) / n));

  const PairSampler g1(GumbelScenario{BivariateScenario::constants(1, 1, 1), 1.0});
  const auto joint = estimate(
      [&](RngSpec r) {
        const auto p = g1.draw(r);
        return (p.tau1 > 1.0 && p.tau2 > 1.0) ? 1.0 : 0.0;
      },
      kN, seeded(41));
  CHECK(within_3se(joint, std::exp(-4.0)));
  const auto eq = estimate([&](RngSpec r) { return g1.draw(r).equal ? 1.0 : 0.0; }, kN, seeded(42));
  CHECK(within_3se(eq, 0.2849976548947546));

  const PairSampler g2(GumbelScenario{BivariateScenario::constants(2, 2, 1), 1.0});
  const auto cov = estimate_covariance(
      [&](RngSpec r) {
        const auto p = g2.draw(r);
        return std::array{p.tau1, p.tau2};
      },
      kN, seeded(43));
  CHECK(within_3se(cov, gumbel_covariance_constant(2, 2, 1).value));
  CHECK(cov.mean < 0.0);
}

TEST_CASE("shock system sampling") {
  std::vector<Shock> shocks;
  for (std::vector<int> m : {std::vector{1}, {2}, {3}, {1, 2}, {1, 3}, {2, 3}, {1, 2, 3}})
    shocks.push_back({m, IntensityModel::constant(1.0)});
  const SystemSampler all(ShockSystem(3, shocks));
  const auto e = estimate([&](RngSpec r) { return all.draw(r).all_equal ? 1.0 : 0.0; }, kN, seeded(51));
  CHECK(within_3se(e, 1.0 / 7.0));

  const SystemSampler grand(ShockSystem(3, {{{1, 2, 3}, IntensityModel::constant(2.0)}}));
  for (std::uint64_t k = 0; k < 1000; ++k) {
    const auto s = grand.draw(RngSpec{1, k});
    CHECK(s.all_equal);
    CHECK(s.tau[0] == s.tau[1]);
    CHECK(s.tau[1] == s.tau[2]);
  }

  const SystemSampler mult(pattern_system(4, {SubsetPattern::Kind::Multiplicative, 0.5}));
  const auto m = estimate([&](RngSpec r) { return mult.draw(r).all_equal ? 1.0 : 0.0; }, kN, seeded(52));
  CHECK(within_3se(m, 0.125));
  CHECK(mult.ties() == 0);

  // The pairwise marginal predicts pair equality in the full system.
  const auto sys = pattern_system(3, {SubsetPattern::Kind::Fractional, 1.0});
  const SystemSampler full(sys);
  const auto pair = estimate(
      [&](RngSpec r) {
        const auto s = full.draw(r);
        return s.cause[0] == s.cause[2] ? 1.0 : 0.0;
      },
      kN, seeded(53));
  CHECK(within_3se(pair, prob_equal(pairwise_scenario(sys, 1, 3)).value));
}

TEST_CASE("ensemble and fixed-path sampling") {
  BivariateScenario sc;
  sc.alpha1 = IntensityModel::path_driven(Shape::affine(0.5, 0.5));
  sc.alpha2 = IntensityModel::constant(1.0);
  sc.alpha3 = IntensityModel::path_driven(Shape::exponential(0.4, 0.3));
  sc.paths = simulate_ou_ensemble(OuParams{1.0, 0.5, 0.6, 0.0, 40.0, 0.01}, 8, 77);
  const BivariateModel model(sc);
  const PairSampler ens(sc);
  const auto e = estimate([&](RngSpec r) { return ens.draw(r).equal ? 1.0 : 0.0; }, 400000, seeded(61));
  // Uniform path choice makes the ensemble average the exact target of the estimate.
  CHECK(within_3se(e, model.prob_equal().value));

  BivariateScenario one = sc;
  one.paths = {sc.paths[3]};
  const PairSampler fixed(sc, {PathChoice::Mode::Fixed, 3});
  const auto f = estimate([&](RngSpec r) { return fixed.draw(r).equal ? 1.0 : 0.0; }, 400000, seeded(62));
  CHECK(within_3se(f, BivariateModel(one).prob_equal().value));
  CHECK_THROWS_AS(PairSampler(sc, {PathChoice::Mode::Fixed, 8}).draw(RngSpec{0, 0}), InvalidArgument);
}

TEST_CASE("raw sample export") {
  std::stringstream pairs;
  write_samples_csv(pairs, PairSampler(BivariateScenario::constants(1, 1, 1)), 5, 1);
  std::string line;
  std::getline(pairs, line);
  CHECK(line == "tau1,tau2,equal,cause1,cause2");
  int rows = 0;
  while (std::getline(pairs, line)) ++rows;
  CHECK(rows == 5);

  std::stringstream sys;
  write_samples_csv(sys, SystemSampler(ShockSystem(3, {{{1, 2, 3}, IntensityModel::constant(1.0)}})), 2, 1);
  std::getline(sys, line);
  CHECK(line == "tau1,tau2,tau3,all_equal,cause1,cause2,cause3");
  std::getline(sys, line);
  CHECK(line.substr(line.size() - 19) == "1,1+2+3,1+2+3,1+2+3");
}
