#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "simulstop/error.hpp"
#include "simulstop/multivariate.hpp"

using namespace simulstop;
using Catch::Matchers::WithinAbs;

namespace {

Shock shock(std::vector<int> members, double rate) {
  return Shock{std::move(members), IntensityModel::constant(rate)};
}

ShockSystem uniform_rate(int n, double rate) {
  std::vector<Shock> shocks;
  for (std::uint32_t m = 1; m < (1u << n); ++m) {
    std::vector<int> members;
    for (int i = 0; i < n; ++i)
      if (m & (1u << i)) members.push_back(i + 1);
    shocks.push_back(shock(members, rate));
  }
  return ShockSystem(n, shocks);
}

}  // namespace

TEST_CASE("subset keys are canonical") {
  const ShockSystem sys(3, {shock({3, 1, 1}, 1.0), shock({2}, 2.0), shock({1}, 0.5), shock({3}, 1.0)});
  REQUIRE(sys.shocks().size() == 4);
  CHECK(sys.shocks()[0].members == std::vector<int>{1});
  CHECK(sys.shocks()[1].members == std::vector<int>{1, 3});
  CHECK(sys.shocks()[2].members == std::vector<int>{2});
  CHECK(sys.mask(1) == 0b101u);
  CHECK_FALSE(sys.grand_shock());
  CHECK_THROWS_AS(ShockSystem(2, {shock({1}, 1.0), shock({1}, 2.0), shock({2}, 1.0)}), ConfigError);
  CHECK_THROWS_AS(ShockSystem(2, {shock({1}, 1.0)}), ConfigError);
  CHECK_THROWS_AS(ShockSystem(2, {shock({1, 3}, 1.0), shock({2}, 1.0)}), ConfigError);
  CHECK_THROWS_AS(ShockSystem(13, {}), ConfigError);
}

TEST_CASE("joint survival of a shock system") {
  const auto sys = uniform_rate(3, 1.0);
  const double ones[] = {1.0, 1.0, 1.0};
  CHECK_THAT(joint_survival_n(sys, ones).value, WithinAbs(std::exp(-7.0), 1e-15));
  const double zeros[] = {0.0, 0.0, 0.0};
  CHECK(joint_survival_n(sys, zeros).value == 1.0);
  const double two[] = {1.0, 2.0};
  CHECK_THROWS_AS(joint_survival_n(sys, two), InvalidArgument);
}

TEST_CASE("two-component systems reduce to the bivariate model") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.1, 3.0);
  for (int trial = 0; trial < 20; ++trial) {
    const double a1 = u(rng), a2 = u(rng), a3 = u(rng);
    const ShockSystem sys(2, {shock({1}, a1), shock({2}, a2), shock({1, 2}, a3)});
    const BivariateModel mo(BivariateScenario::constants(a1, a2, a3));
    const double s[] = {u(rng), u(rng)};
    CHECK_THAT(joint_survival_n(sys, s).value, WithinAbs(mo.joint_survival(s[0], s[1]).value, 1e-12));
    CHECK_THAT(prob_all_equal(sys).value, WithinAbs(mo.prob_equal().value, 1e-12));
  }
  // State-driven shocks along the identity clock.
  BivariateScenario sc;
  sc.alpha1 = IntensityModel::path_driven(Shape::sin_squared(0.5, 1.0));
  sc.alpha2 = IntensityModel::constant(0.7);
  sc.alpha3 = IntensityModel::path_driven(Shape::affine(0.2, 0.1));
  const ShockSystem sys(2, {{{1}, sc.alpha1}, {{2}, sc.alpha2}, {{1, 2}, sc.alpha3}});
  const BivariateModel mo(sc);
  const double s[] = {1.3, 0.4};
  CHECK_THAT(joint_survival_n(sys, s).value, WithinAbs(mo.joint_survival(1.3, 0.4).value, 1e-12));
  CHECK_THAT(prob_all_equal(sys).value, WithinAbs(mo.prob_equal().value, 1e-11));
}

TEST_CASE("probability that all components coincide") {
  CHECK_THAT(prob_all_equal(uniform_rate(2, 1.0)).value, WithinAbs(1.0 / 3.0, 1e-12));
  CHECK_THAT(prob_all_equal(uniform_rate(3, 1.0)).value, WithinAbs(1.0 / 7.0, 1e-12));
  const ShockSystem no_grand(3, {shock({1, 2}, 1.0), shock({3}, 1.0)});
  CHECK(prob_all_equal(no_grand).value == 0.0);
}

TEST_CASE("pattern closed forms") {
  const SubsetPattern mult{SubsetPattern::Kind::Multiplicative, 1.0};
  const SubsetPattern frac{SubsetPattern::Kind::Fractional, 1.0};
  CHECK(prob_all_equal_pattern(2, mult) == 0.5);
  CHECK(prob_all_equal_pattern(3, mult) == 0.25);
  CHECK_THAT(prob_all_equal_pattern(2, frac), WithinAbs(0.2, 1e-15));
  for (int n = 2; n <= 8; ++n) CHECK_THAT(prob_all_equal_pattern(n, mult), WithinAbs(std::ldexp(1.0, 1 - n), 1e-10));
  for (int n = 2; n <= 6; ++n) {
    for (const auto& p : {mult, frac, SubsetPattern{SubsetPattern::Kind::Fractional, 3.7}}) {
      CHECK_THAT(prob_all_equal(pattern_system(n, p)).value, WithinAbs(prob_all_equal_pattern(n, p), 1e-9));
    }
  }
  // Kahan path: 4095 terms.
  CHECK_THAT(prob_all_equal(pattern_system(12, mult)).value, WithinAbs(std::ldexp(1.0, -11), 1e-12));
}

TEST_CASE("pairwise marginalization") {
  const auto sc = pairwise_scenario(uniform_rate(3, 1.0), 1, 2);
  CHECK(sc.alpha1.constant_rate() == 2.0);
  CHECK(sc.alpha2.constant_rate() == 2.0);
  CHECK(sc.alpha3.constant_rate() == 2.0);
  CHECK_THAT(prob_equal(sc).value, WithinAbs(1.0 / 3.0, 1e-12));

  const ShockSystem two(2, {shock({1}, 0.3), shock({2}, 0.4), shock({1, 2}, 0.5)});
  const auto id = pairwise_scenario(two, 1, 2);
  CHECK(id.alpha1.constant_rate() == 0.3);
  CHECK(id.alpha2.constant_rate() == 0.4);
  CHECK(id.alpha3.constant_rate() == 0.5);

  const ShockSystem grand(3, {shock({1, 2, 3}, 1.5)});
  const auto g = pairwise_scenario(grand, 3, 1);
  CHECK(g.alpha1.constant_rate() == 0.0);
  CHECK_THAT(prob_equal(g).value, WithinAbs(1.0, 1e-12));
  CHECK_THROWS_AS(pairwise_scenario(grand, 1, 1), InvalidArgument);
  CHECK_THROWS_AS(pairwise_scenario(grand, 0, 2), InvalidArgument);

  // Pair survival is the n-system survival with the third time at zero.
  const auto sys = pattern_system(4, {SubsetPattern::Kind::Fractional, 2.0});
  const auto p = pairwise_scenario(sys, 2, 4);
  const double s[] = {0.0, 0.6, 0.0, 1.1};
  CHECK_THAT(joint_survival(p, 0.6, 1.1).value, WithinAbs(joint_survival_n(sys, s).value, 1e-14));
}

TEST_CASE("permutation equivariance and monotonicity") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.05, 2.0);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 4;
    std::vector<Shock> shocks;
    for (std::uint32_t m = 1; m < (1u << n); ++m) {
      if (m != 0b1111u && u(rng) < 0.8) continue;
      std::vector<int> members;
      for (int i = 0; i < n; ++i)
        if (m & (1u << i)) members.push_back(i + 1);
      shocks.push_back(shock(members, u(rng)));
    }
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 1);
    std::shuffle(perm.begin(), perm.end(), rng);
    std::vector<Shock> relabeled;
    for (const auto& sh : shocks) {
      std::vector<int> members;
      for (int i : sh.members) members.push_back(perm[i - 1]);
      relabeled.push_back({members, sh.model});
    }
    const ShockSystem a(n, shocks), b(n, relabeled);
    std::vector<double> s(n), t(n);
    for (int i = 0; i < n; ++i) s[i] = u(rng);
    for (int i = 0; i < n; ++i) t[perm[i] - 1] = s[i];
    const double base = joint_survival_n(a, s).value;
    CHECK_THAT(joint_survival_n(b, t).value, WithinAbs(base, 1e-15));

    // Adding a new pair shock lowers survival.
    std::vector<Shock> more = shocks;
    for (std::uint32_t m : {0b0011u, 0b0101u, 0b1010u}) {
      std::vector<int> members;
      for (int i = 0; i < n; ++i)
        if (m & (1u << i)) members.push_back(i + 1);
      if (std::none_of(more.begin(), more.end(), [&](const Shock& x) { return x.members == members; })) {
        more.push_back(shock(members, 0.3));
        break;
      }
    }
    if (more.size() > shocks.size()) CHECK(joint_survival_n(ShockSystem(n, more), s).value < base);
  }
}
