#include "simulstop/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <queue>

namespace simulstop::quadrature {

namespace {

// QUADPACK qk21 abscissae and weights.
constexpr std::array<double, 11> kXgk = {
    0.995657163025808080735527280689003, 0.973906528517171720077964012084452,
    0.930157491355708226001207180059508, 0.865063366688984510732096688423493,
    0.780817726586416897063717578345042, 0.679409568299024406234327365114874,
    0.562757134668604683339000099272694, 0.433395394129247190799265943165784,
    0.294392862701460198131126603103866, 0.148874338981631210884826001129720,
    0.0};
constexpr std::array<double, 11> kWgk = {
    0.011694638867371874278064396062192, 0.032558162307964727478818972459390,
    0.054755896574351996031381300244580, 0.075039674810919952767043140916190,
    0.093125454583697605535065465083366, 0.109387158802297641899210590325805,
    0.123491976262065851077600410402083, 0.134709217311473325928054001771707,
    0.142775938577060080797094273138717, 0.147739104901338491374841515972068,
    0.149445554002916905664936468389821};
constexpr std::array<double, 5> kWg = {
    0.066671344308688137593568809893332, 0.149451349150580593145776339657697,
    0.219086362515982043995534934228163, 0.269266719309996355091226921569469,
    0.295524224714752870173892994651338};

constexpr double kEps = std::numeric_limits<double>::epsilon();

struct Segment {
  double a;
  double b;
  double value;
  double error;
  bool operator<(const Segment& other) const { return error < other.error; }
};

Result rule(const Fn1& f, double a, double b, Budget& budget) {
  if (!budget.consume(21)) {
    throw BudgetExceeded("quadrature evaluation budget exhausted", {});
  }
  return gauss_kronrod21(f, a, b);
}

double clean(double v) { return std::isfinite(v) ? v : 0.0; }

}  // namespace

Result gauss_kronrod21(const Fn1& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  const double fc = f(center);
  double resk = fc * kWgk[10];
  double resg = 0.0;
  double resabs = std::abs(resk);
  std::array<double, 10> f1{};
  std::array<double, 10> f2{};
  for (std::size_t j = 0; j < 10; ++j) {
    const double dx = half * kXgk[j];
    f1[j] = f(center - dx);
    f2[j] = f(center + dx);
    const double sum = f1[j] + f2[j];
    resk += kWgk[j] * sum;
    resabs += kWgk[j] * (std::abs(f1[j]) + std::abs(f2[j]));
    if (j % 2 == 1) resg += kWg[j / 2] * sum;
  }
  const double mean = 0.5 * resk;
  double resasc = kWgk[10] * std::abs(fc - mean);
  for (std::size_t j = 0; j < 10; ++j) {
    resasc += kWgk[j] * (std::abs(f1[j] - mean) + std::abs(f2[j] - mean));
  }
  const double scale = std::abs(half);
  resk *= half;
  resabs *= scale;
  resasc *= scale;
  double err = std::abs(resk - resg * half);
  if (resasc != 0.0 && err != 0.0) {
    err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  }
  if (resabs > std::numeric_limits<double>::min() / (50.0 * kEps)) {
    err = std::max(err, 50.0 * kEps * resabs);
  }
  return {resk, err, 21};
}

Result integrate_partitioned(const Fn1& f, std::span<const double> breaks, double tol,
                             Budget& budget) {
  if (!(tol > 0.0)) throw InvalidArgument("quadrature tolerance must be positive");
  const std::size_t start = budget.used();
  std::priority_queue<Segment> heap;
  std::vector<Segment> frozen;
  double total = 0.0;
  double total_error = 0.0;
  auto partial = [&] { return Result{total, total_error, budget.used() - start}; };
  auto evaluate = [&](double a, double b) {
    try {
      return rule(f, a, b, budget);
    } catch (const BudgetExceeded&) {
      throw BudgetExceeded("quadrature evaluation budget exhausted", partial());
    }
  };
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    const double a = breaks[i];
    const double b = breaks[i + 1];
    if (!(b > a)) continue;
    const Result r = evaluate(a, b);
    total += r.value;
    total_error += r.abs_error;
    heap.push({a, b, r.value, r.abs_error});
  }
  std::size_t steps = 0;
  double frozen_error = 0.0;
  auto unfinished = [&] {
    const double target = std::max(tol, 50.0 * kEps * std::abs(total));
    if (total_error <= target) return false;
    // Segments too narrow to split (jumps, roundoff) cap the attainable accuracy; refine
    // the rest only until it is no larger than their share.
    return total_error - frozen_error > std::max(target - frozen_error, frozen_error);
  };
  while (!heap.empty() && unfinished()) {
    const Segment worst = heap.top();
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    const double width = worst.b - worst.a;
    if (width <= 1e-13 * std::max({1.0, std::abs(worst.a), std::abs(worst.b)}) ||
        mid <= worst.a || mid >= worst.b) {
      frozen.push_back(worst);
      frozen_error += worst.error;
      continue;
    }
    const Result left = evaluate(worst.a, mid);
    const Result right = evaluate(mid, worst.b);
    total += left.value + right.value - worst.value;
    total_error += left.abs_error + right.abs_error - worst.error;
    heap.push({worst.a, mid, left.value, left.abs_error});
    heap.push({mid, worst.b, right.value, right.abs_error});
    // Periodic resummation keeps the incremental totals from drifting.
    if (++steps % 256 == 0) {
      auto copy = heap;
      total = 0.0;
      total_error = 0.0;
      while (!copy.empty()) {
        total += copy.top().value;
        total_error += copy.top().error;
        copy.pop();
      }
      for (const auto& s : frozen) {
        total += s.value;
        total_error += s.error;
      }
    }
  }
  std::vector<double> values;
  std::vector<double> errors;
  while (!heap.empty()) {
    values.push_back(heap.top().value);
    errors.push_back(heap.top().error);
    heap.pop();
  }
  for (const auto& s : frozen) {
    values.push_back(s.value);
    errors.push_back(s.error);
  }
  // Ascending magnitude order limits cancellation in the final sum.
  std::sort(values.begin(), values.end(),
            [](double x, double y) { return std::abs(x) < std::abs(y); });
  total = 0.0;
  for (double v : values) total += v;
  total_error = 0.0;
  for (double e : errors) total_error += e;
  return {total, std::max(total_error, 0.0), budget.used() - start};
}

Result integrate_partitioned(const Fn1& f, std::span<const double> breaks, double tol) {
  Budget budget;
  return integrate_partitioned(f, breaks, tol, budget);
}

Result integrate(const Fn1& f, double a, double b, double tol, Budget& budget) {
  if (a == b) return {};
  if (b < a) {
    Result r = integrate(f, b, a, tol, budget);
    r.value = -r.value;
    return r;
  }
  const std::array<double, 2> breaks = {a, b};
  return integrate_partitioned(f, breaks, tol, budget);
}

Result integrate(const Fn1& f, double a, double b, double tol) {
  Budget budget;
  return integrate(f, a, b, tol, budget);
}

Result integrate_from(const Integrand1D& f, double a, double tol, Budget& budget) {
  if (!(tol > 0.0)) throw InvalidArgument("quadrature tolerance must be positive");
  if (f.decay_rate && *f.decay_rate > 0.0) {
    const double r = *f.decay_rate;
    // Estimate C in |f(x)| <= C e^{-r (x - a)} from samples spread over a few decay lengths.
    double c = 0.0;
    for (double k : {0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0}) {
      const double x = a + k / r;
      c = std::max(c, std::abs(clean(f.eval(x))) * std::exp(r * (x - a)));
    }
    budget.consume(7);
    if (c == 0.0) c = 1.0;
    const double tail_target = tol / 10.0;
    const double horizon = a + std::max(1.0 / r, std::log(c / (r * tail_target)) / r);
    Result r0 = integrate(f.eval, a, horizon, tol * 0.9, budget);
    r0.abs_error += tail_target;
    return r0;
  }
  // x = a + u / (1 - u) maps (0, 1) onto (a, inf).
  auto mapped = [&](double u) {
    const double w = 1.0 - u;
    if (!(w > 0.0)) return 0.0;
    const double x = a + u / w;
    if (!std::isfinite(x)) return 0.0;
    const double v = f.eval(x) / (w * w);
    return std::isfinite(v) ? v : 0.0;
  };
  return integrate(mapped, 0.0, 1.0, tol, budget);
}

Result integrate_semi_infinite(const Integrand1D& f, double tol, Budget& budget) {
  return integrate_from(f, 0.0, tol, budget);
}

Result integrate_semi_infinite(const Integrand1D& f, double tol) {
  Budget budget;
  return integrate_semi_infinite(f, tol, budget);
}

Result integrate_double(const Fn2& f, Region region, double tol, Budget& budget) {
  const double inner_tol = tol / 10.0;
  double worst_inner = 0.0;
  auto inner = [&](double y) {
    Result r;
    switch (region) {
      case Region::FullQuadrant:
        r = integrate_from({[&](double x) { return f(x, y); }, std::nullopt}, 0.0, inner_tol,
                           budget);
        break;
      case Region::LowerTriangle:
        r = integrate([&](double x) { return f(x, y); }, 0.0, y, inner_tol, budget);
        break;
      case Region::UpperTriangle:
        r = integrate_from({[&](double x) { return f(x, y); }, std::nullopt}, y, inner_tol,
                           budget);
        break;
    }
    worst_inner = std::max(worst_inner, r.abs_error);
    return r.value;
  };
  const std::size_t start = budget.used();
  Result outer = integrate_from({inner, std::nullopt}, 0.0, tol, budget);
  outer.abs_error += worst_inner;
  outer.evaluations = budget.used() - start;
  return outer;
}

Result integrate_double(const Fn2& f, Region region, double tol) {
  Budget budget;
  return integrate_double(f, region, tol, budget);
}

CumulativeIntegral::CumulativeIntegral(Fn1 f, std::vector<double> partition, double tol)
    : f_(std::move(f)), partition_(std::move(partition)) {
  if (partition_.size() < 2) throw InvalidArgument("cumulative integral needs two breakpoints");
  cumulative_.assign(partition_.size(), 0.0);
  Budget budget;
  const double cell_tol = std::max(tol / static_cast<double>(partition_.size()), 1e-300);
  for (std::size_t i = 1; i < partition_.size(); ++i) {
    if (!(partition_[i] > partition_[i - 1])) {
      throw InvalidArgument("cumulative integral partition must be strictly increasing");
    }
    Result r = gauss_kronrod21(f_, partition_[i - 1], partition_[i]);
    if (r.abs_error > cell_tol) {
      r = integrate(f_, partition_[i - 1], partition_[i], cell_tol, budget);
    }
    cumulative_[i] = cumulative_[i - 1] + r.value;
    abs_error_ += r.abs_error;
  }
}

double CumulativeIntegral::operator()(double t) const {
  if (t <= partition_.front()) return 0.0;
  if (t >= partition_.back()) return cumulative_.back();
  const auto it = std::upper_bound(partition_.begin(), partition_.end(), t);
  const std::size_t k = static_cast<std::size_t>(it - partition_.begin()) - 1;
  if (t == partition_[k]) return cumulative_[k];
  return cumulative_[k] + gauss_kronrod21(f_, partition_[k], t).value;
}

}  // namespace simulstop::quadrature
