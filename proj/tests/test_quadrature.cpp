#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "simulstop/quadrature.hpp"

using namespace simulstop::quadrature;
using Catch::Matchers::WithinAbs;

TEST_CASE("semi-infinite integrals of exponential densities") {
  CHECK_THAT(integrate_semi_infinite({[](double x) { return std::exp(-x); }, std::nullopt}, 1e-10).value,
             WithinAbs(1.0, 1e-10));
  CHECK_THAT(integrate_semi_infinite({[](double x) { return 3.0 * std::exp(-3.0 * x); }, std::nullopt}, 1e-10).value,
             WithinAbs(1.0, 1e-10));
  CHECK_THAT(integrate_semi_infinite({[](double x) { return x * std::exp(-x); }, std::nullopt}, 1e-10).value,
             WithinAbs(1.0, 1e-10));
}

TEST_CASE("decay hint truncates at a safe horizon") {
  for (double r : {0.1, 1.0, 7.0}) {
    const auto res = integrate_semi_infinite({[r](double x) { return r * std::exp(-r * x); }, r}, 1e-12);
    CHECK_THAT(res.value, WithinAbs(1.0, 1e-11));
    CHECK(res.abs_error >= 0.0);
  }
  // x^3 e^{-x} has Gamma(4) = 6; the hint undershoots the true decay of the prefactor.
  const auto g = integrate_semi_infinite({[](double x) { return x * x * x * std::exp(-x); }, 1.0}, 1e-10);
  CHECK_THAT(g.value, WithinAbs(6.0, 1e-8));
}

TEST_CASE("double integrals over the quadrant and its triangles") {
  auto f = [](double x, double y) { return std::exp(-x - y); };
  CHECK_THAT(integrate_double(f, Region::FullQuadrant).value, WithinAbs(1.0, 1e-9));
  CHECK_THAT(integrate_double(f, Region::LowerTriangle).value, WithinAbs(0.5, 1e-9));

  // int_0^inf e^{-y} int_y^inf e^{-2x} dx dy = 1/6; the x < y part carries 1/3.
  auto g = [](double x, double y) { return std::exp(-2.0 * x - y); };
  CHECK_THAT(integrate_double(g, Region::UpperTriangle).value, WithinAbs(1.0 / 6.0, 1e-9));
  CHECK_THAT(integrate_double(g, Region::LowerTriangle).value, WithinAbs(1.0 / 3.0, 1e-9));
}

TEST_CASE("region additivity") {
  auto g = [](double x, double y) { return (1.0 + x * y) * std::exp(-1.5 * x - 0.7 * y); };
  const double tol = 1e-10;
  const double lo = integrate_double(g, Region::LowerTriangle, tol).value;
  const double up = integrate_double(g, Region::UpperTriangle, tol).value;
  const double full = integrate_double(g, Region::FullQuadrant, tol).value;
  CHECK_THAT(lo + up, WithinAbs(full, 10.0 * tol));
  // 1/(1.5*0.7) + 1/(1.5^2 * 0.7^2)
  CHECK_THAT(full, WithinAbs(1.0 / 1.05 + 1.0 / (2.25 * 0.49), 10.0 * tol));
}

TEST_CASE("linearity on random polynomial-times-exponential integrands") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> coef(-2.0, 2.0);
  std::uniform_real_distribution<double> rate(0.3, 4.0);
  const double tol = 1e-10;
  for (int trial = 0; trial < 20; ++trial) {
    const double a = coef(rng), b = coef(rng), c0 = coef(rng), c1 = coef(rng), r1 = rate(rng),
                 r2 = rate(rng);
    auto f = [=](double x) { return (c0 + c1 * x) * std::exp(-r1 * x); };
    auto g = [=](double x) { return x * x * std::exp(-r2 * x); };
    auto h = [=](double x) { return a * f(x) + b * g(x); };
    const double lhs = integrate_semi_infinite({h, std::nullopt}, tol).value;
    const double rhs = a * integrate_semi_infinite({f, std::nullopt}, tol).value +
                       b * integrate_semi_infinite({g, std::nullopt}, tol).value;
    CHECK_THAT(lhs, WithinAbs(rhs, 10.0 * tol));
    const double exact = a * (c0 / r1 + c1 / (r1 * r1)) + b * 2.0 / (r2 * r2 * r2);
    CHECK_THAT(lhs, WithinAbs(exact, 10.0 * tol));
  }
}

TEST_CASE("halving the tolerance never worsens the error") {
  struct Case {
    Fn1 f;
    double exact;
  };
  const Case cases[] = {
      {[](double x) { return std::exp(-x); }, 1.0},
      {[](double x) { return x * std::exp(-2.0 * x); }, 0.25},
      {[](double x) { return 1.0 / ((1.0 + x) * (1.0 + x)); }, 1.0},
      {[](double x) { return std::exp(-x * x); }, std::sqrt(M_PI) / 2.0},
  };
  for (const auto& c : cases) {
    double prev = INFINITY;
    for (double tol = 1e-4; tol >= 1e-12; tol /= 2.0) {
      const double err = std::abs(integrate_semi_infinite({c.f, std::nullopt}, tol).value - c.exact);
      CHECK(err <= std::max(prev, 1e-14));
      prev = err;
    }
  }
}

TEST_CASE("error estimate covers the true error") {
  const auto r = integrate([](double x) { return std::sqrt(x); }, 0.0, 1.0, 1e-10);
  CHECK_THAT(r.value, WithinAbs(2.0 / 3.0, std::max(1e-10, r.abs_error)));
  CHECK(r.evaluations > 0);
}

TEST_CASE("budget exhaustion reports the partial estimate") {
  Budget budget(21 * 5);
  try {
    integrate([](double x) { return std::abs(std::sin(1000.0 * x)); }, 0.0, 10.0, 1e-14, budget);
    FAIL("expected budget exhaustion");
  } catch (const BudgetExceeded& e) {
    CHECK(e.code() == simulstop::ErrorCode::BudgetExceeded);
    CHECK(std::isfinite(e.partial().value));
  }
}

TEST_CASE("nonpositive tolerance is rejected") {
  CHECK_THROWS_AS(integrate([](double x) { return x; }, 0.0, 1.0, 0.0), simulstop::InvalidArgument);
}

TEST_CASE("cumulative integral matches direct integration") {
  std::vector<double> partition;
  for (int i = 0; i <= 20; ++i) partition.push_back(0.5 * i);
  CumulativeIntegral F([](double x) { return std::cos(x); }, partition);
  for (double t : {0.0, 0.3, 2.5, 7.77, 10.0}) {
    CHECK_THAT(F(t), WithinAbs(std::sin(t), 1e-13));
  }
  CHECK_THAT(F.total(), WithinAbs(std::sin(10.0), 1e-13));
}
