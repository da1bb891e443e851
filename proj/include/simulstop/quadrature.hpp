#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "simulstop/error.hpp"

// Adaptive Gauss-Kronrod integration on finite intervals, [a, inf) and
// planar regions of the positive quadrant.
namespace simulstop::quadrature {

inline constexpr double kDefaultTolerance = 1e-10;
inline constexpr std::size_t kEvaluationBudget = 10'000'000;

struct Result {
  double value = 0.0;
  double abs_error = 0.0;
  std::size_t evaluations = 0;
};

struct Integrand1D {
  std::function<double(double)> eval;
  // r such that |f(x)| <= C e^{-r x} eventually. Absent: map [0, inf) onto (0, 1).
  std::optional<double> decay_rate;
};

enum class Region {
  FullQuadrant,   // x, y in [0, inf)
  LowerTriangle,  // x < y
  UpperTriangle,  // x > y
};

// Raised when the evaluation budget runs out; carries the estimate reached so far.
class BudgetExceeded : public Error {
 public:
  BudgetExceeded(const std::string& what, Result partial)
      : Error(ErrorCode::BudgetExceeded, what), partial_(partial) {}
  const Result& partial() const noexcept { return partial_; }

 private:
  Result partial_;
};

// Shared evaluation counter so nested integrations draw from one budget.
class Budget {
 public:
  explicit Budget(std::size_t limit = kEvaluationBudget) : limit_(limit) {}
  bool consume(std::size_t n) noexcept {
    used_ += n;
    return used_ <= limit_;
  }
  std::size_t used() const noexcept { return used_; }
  std::size_t limit() const noexcept { return limit_; }

 private:
  std::size_t limit_;
  std::size_t used_ = 0;
};

using Fn1 = std::function<double(double)>;
using Fn2 = std::function<double(double, double)>;

// Single 21-point Kronrod rule with its embedded 10-point Gauss error estimate.
Result gauss_kronrod21(const Fn1& f, double a, double b);

Result integrate(const Fn1& f, double a, double b, double tol = kDefaultTolerance);
Result integrate(const Fn1& f, double a, double b, double tol, Budget& budget);

// Global adaptive integration over [breaks.front(), breaks.back()] starting from the
// given partition, so no subinterval ever straddles a breakpoint.
Result integrate_partitioned(const Fn1& f, std::span<const double> breaks, double tol,
                             Budget& budget);
Result integrate_partitioned(const Fn1& f, std::span<const double> breaks,
                             double tol = kDefaultTolerance);

Result integrate_semi_infinite(const Integrand1D& f, double tol = kDefaultTolerance);
Result integrate_semi_infinite(const Integrand1D& f, double tol, Budget& budget);
// Integral over [a, inf).
Result integrate_from(const Integrand1D& f, double a, double tol, Budget& budget);

// Iterated adaptive integration; the inner integral runs at tol / 10.
Result integrate_double(const Fn2& f, Region region, double tol = kDefaultTolerance);
Result integrate_double(const Fn2& f, Region region, double tol, Budget& budget);

// Running integral t -> int_{t_0}^{t} f over a fixed partition. Each cell is integrated
// once at construction; queries add one Kronrod rule on the partial cell.
class CumulativeIntegral {
 public:
  CumulativeIntegral(Fn1 f, std::vector<double> partition, double tol = 1e-13);

  double operator()(double t) const;
  double total() const { return cumulative_.back(); }
  double abs_error() const { return abs_error_; }

 private:
  Fn1 f_;
  std::vector<double> partition_;
  std::vector<double> cumulative_;
  double abs_error_ = 0.0;
};

}  // namespace simulstop::quadrature
