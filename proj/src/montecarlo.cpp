#include "simulstop/montecarlo.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <ostream>
#include <string>
#include <thread>

#include <fmt/format.h>

#include "simulstop/error.hpp"

namespace simulstop {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kZ99 = 2.576;

// A^{-1}(z); +inf when the curve never reaches z or z lies beyond the state path.
double invert(const CompensatorCurve& c, double z) {
  if (c.model().identically_zero()) return kInf;
  const double t = c.inverse(z);
  if (std::isfinite(t) || c.path_bound() || c.constant_rate()) return t;
  // Identity clock past the tabulated extent.
  double lo = c.extent(), hi = 2.0 * std::max(lo, 1.0);
  while (c.at(hi) < z) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e7) return kInf;
  }
  while (hi - lo > 1e-12 * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    (c.at(mid) >= z ? hi : lo) = mid;
  }
  return hi;
}

std::size_t uniform_index(SplitMix64& gen, std::size_t size) {
  return static_cast<std::size_t>((static_cast<unsigned __int128>(gen.next()) * size) >> 64);
}

void require_within_path(double tau, std::initializer_list<const CompensatorCurve*> curves) {
  if (std::isfinite(tau)) return;
  for (const auto* c : curves) {
    if (c->path_bound()) throw HorizonExceeded("sampled time lies beyond the state path");
  }
}

std::size_t choose(const PathChoice& choice, std::size_t count, SplitMix64& gen) {
  if (choice.mode == PathChoice::Mode::Fixed) {
    if (choice.index >= count) throw InvalidArgument("fixed path index out of range");
    return choice.index;
  }
  return count > 1 ? uniform_index(gen, count) : 0;
}

const char* cause_name(Cause c) {
  switch (c) {
    case Cause::Shock1: return "shock1";
    case Cause::Shock2: return "shock2";
    case Cause::Common: return "common";
    case Cause::GumbelPair: return "gumbel-pair";
  }
  return "?";
}

// Welford summary of one chunk; merged with Chan's update.
struct Summary {
  double n = 0.0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x) {
    n += 1.0;
    const double d = x - mean;
    mean += d / n;
    m2 += d * (x - mean);
  }
  static Summary merge(const Summary& a, const Summary& b) {
    if (a.n == 0.0) return b;
    if (b.n == 0.0) return a;
    Summary s;
    s.n = a.n + b.n;
    const double d = b.mean - a.mean;
    s.mean = a.mean + d * (b.n / s.n);
    s.m2 = a.m2 + b.m2 + d * d * (a.n * b.n / s.n);
    return s;
  }
};

template <std::size_t K>
using Summaries = std::array<Summary, K>;

template <std::size_t K>
Summaries<K> merge_range(const std::vector<Summaries<K>>& parts, std::size_t lo, std::size_t hi) {
  if (hi - lo == 1) return parts[lo];
  const std::size_t mid = lo + (hi - lo) / 2;
  const auto a = merge_range(parts, lo, mid);
  const auto b = merge_range(parts, mid, hi);
  Summaries<K> out;
  for (std::size_t k = 0; k < K; ++k) out[k] = Summary::merge(a[k], b[k]);
  return out;
}

template <std::size_t K, class F>
Summaries<K> run(const F& f, std::uint64_t n, const EstimateOptions& opts) {
  if (n < 100) throw InvalidArgument("at least 100 samples are required");
  const std::size_t chunks = std::max<std::size_t>(1, std::min<std::uint64_t>(opts.chunks, n));
  std::vector<Summaries<K>> parts(chunks);
  std::vector<std::exception_ptr> errors(chunks);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t c = next++; c < chunks; c = next++) {
      const std::uint64_t begin = n * c / chunks;
      const std::uint64_t end = n * (c + 1) / chunks;
      try {
        for (std::uint64_t k = begin; k < end; ++k) {
          const std::array<double, K> x = f(RngSpec{opts.seed, k});
          for (std::size_t j = 0; j < K; ++j) parts[c][j].add(x[j]);
        }
      } catch (...) {
        errors[c] = std::current_exception();
      }
    }
  };
  const unsigned threads = std::min<std::size_t>(resolve_threads(opts.threads), chunks);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return merge_range(parts, 0, chunks);
}

EstimateWithCI finish(double mean, double se, std::uint64_t n) {
  return {mean, se, n, kZ99 * se};
}

double standard_error(const Summary& s) {
  return s.n > 1.0 ? std::sqrt(s.m2 / (s.n - 1.0) / s.n) : 0.0;
}

}  // namespace

double sample_eta(const CompensatorCurve& c, double z) {
  if (!(z > 0.0)) throw InvalidArgument("exponential draw must be positive");
  const double t = invert(c, z);
  if (!std::isfinite(t) && c.path_bound()) {
    throw HorizonExceeded("draw exceeds the compensator at the path horizon");
  }
  return t;
}

double gumbel_conditional_inverse(double s, double u, double delta) {
  if (!(u > 0.0 && u < 1.0)) throw InvalidArgument("uniform draw must lie in (0, 1)");
  if (!(delta >= 0.0 && delta <= 1.0)) throw InvalidArgument("delta must lie in [0, 1]");
  // g(t) = log((1 + delta t) e^{-t(1 + delta s)}) - log u decreases from -log u > 0.
  const double log_u = std::log(u);
  const double slope = 1.0 + delta * s;
  auto g = [&](double t) { return std::log1p(delta * t) - t * slope - log_u; };
  double lo = 0.0, hi = 1.0;
  while (g(hi) > 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > 1e300) throw NumericError("conditional inversion failed to bracket the root");
  }
  // Bisection safeguarded Newton; stops at the bisection tolerance 1e-12.
  double t = 0.5 * (lo + hi);
  for (int iter = 0; iter < 400; ++iter) {
    const double v = g(t);
    if (v == 0.0) return t;
    (v > 0.0 ? lo : hi) = t;
    if (hi - lo <= 1e-12 * std::max(1.0, hi)) return 0.5 * (lo + hi);
    const double d = delta / (1.0 + delta * t) - slope;
    double next = t - v / d;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - t) <= 1e-13 * std::max(1.0, t)) return next;
    t = next;
  }
  throw NumericError("conditional inversion did not converge");
}

// ---------------------------------------------------------------------------------------

PairSampler::PairSampler(const BivariateScenario& sc, PathChoice paths)
    : model_(sc), paths_(paths) {}

PairSampler::PairSampler(const GumbelScenario& gs, PathChoice paths)
    : model_(gs.base), delta_(gs.delta), paths_(paths) {
  if (!(gs.delta >= 0.0 && gs.delta <= 1.0)) throw InvalidArgument("delta must lie in [0, 1]");
}

const CurveSet& PairSampler::pick(SplitMix64& gen) const {
  const auto& sets = model_.realizations();
  return sets[choose(paths_, sets.size(), gen)];
}

SamplePair PairSampler::draw(RngSpec rng) const {
  SplitMix64 gen(rng);
  const CurveSet& set = pick(gen);
  const auto& c = set.curves;
  const double z1 = gen.exponential();
  const double z2 = delta_ ? gumbel_conditional_inverse(z1, gen.uniform(), *delta_) : gen.exponential();
  const double z3 = gen.exponential();
  const double e1 = invert(c[0], z1);
  const double e2 = invert(c[1], z2);
  const double e3 = invert(c[2], z3);

  SamplePair p;
  const Cause own1 = delta_ ? Cause::GumbelPair : Cause::Shock1;
  const Cause own2 = delta_ ? Cause::GumbelPair : Cause::Shock2;
  // Ties go to the lower-indexed (own) shock.
  auto settle = [&](double own, Cause own_cause, double& tau, Cause& cause) {
    if (e3 < own) {
      tau = e3;
      cause = Cause::Common;
    } else {
      tau = own;
      cause = own_cause;
      if (own == e3 && std::isfinite(own)) p.tie = true;
    }
  };
  settle(e1, own1, p.tau1, p.cause1);
  settle(e2, own2, p.tau2, p.cause2);
  require_within_path(p.tau1, {&c[0], &c[2]});
  require_within_path(p.tau2, {&c[1], &c[2]});
  p.equal = p.cause1 == Cause::Common && p.cause2 == Cause::Common;
  if (p.tie) ++ties_;
  return p;
}

SystemSampler::SystemSampler(const ShockSystem& sys, PathChoice paths)
    : sys_(sys), sets_(system_realizations(sys)), paths_(paths) {}

SystemSample SystemSampler::draw(RngSpec rng) const {
  SplitMix64 gen(rng);
  const CurveSet& set = sets_[choose(paths_, sets_.size(), gen)];
  const std::size_t m = set.curves.size();
  std::vector<double> eta(m);
  for (std::size_t k = 0; k < m; ++k) eta[k] = invert(set.curves[k], gen.exponential());

  SystemSample out;
  const int n = sys_.n();
  out.tau.assign(n, kInf);
  out.cause.assign(n, m);
  // Shocks are visited in canonical order, so a strict comparison keeps the lower index.
  for (std::size_t k = 0; k < m; ++k) {
    for (int i : sys_.shocks()[k].members) {
      auto& tau = out.tau[i - 1];
      if (eta[k] < tau) {
        tau = eta[k];
        out.cause[i - 1] = k;
      } else if (eta[k] == tau && std::isfinite(tau)) {
        out.tie = true;
      }
    }
  }
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(out.tau[i])) {
      for (std::size_t k = 0; k < m; ++k) {
        if (sys_.mask(k) & (1u << i) && set.curves[k].path_bound()) {
          throw HorizonExceeded("sampled time lies beyond the state path");
        }
      }
    }
  }
  out.all_equal = std::all_of(out.cause.begin(), out.cause.end(),
                              [&](std::size_t k) { return k == out.cause[0] && k < m; });
  if (out.tie) ++ties_;
  return out;
}

SamplePair sample_mo_pair(const BivariateScenario& sc, RngSpec rng) {
  return PairSampler(sc).draw(rng);
}

SamplePair sample_gumbel_pair(const GumbelScenario& gs, RngSpec rng) {
  return PairSampler(gs).draw(rng);
}

SystemSample sample_system(const ShockSystem& sys, RngSpec rng) {
  return SystemSampler(sys).draw(rng);
}

// ---------------------------------------------------------------------------------------

unsigned resolve_threads(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("SIMULSTOP_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(std::min(v, 1024ul));
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

EstimateWithCI estimate(const SampleFn& f, std::uint64_t n, const EstimateOptions& opts) {
  const auto s = run<1>([&](RngSpec r) { return std::array<double, 1>{f(r)}; }, n, opts)[0];
  return finish(s.mean, standard_error(s), n);
}

EstimateWithCI estimate_ratio(const PairFn& f, std::uint64_t n, const EstimateOptions& opts) {
  const auto first = run<2>(f, n, opts);
  const double den = first[1].mean;
  if (!(den > 0.0)) throw UndefinedConditional("no sample fell in the conditioning event");
  const double r = first[0].mean / den;
  const auto second = run<1>(
      [&](RngSpec rng) {
        const auto x = f(rng);
        return std::array<double, 1>{x[0] - r * x[1]};
      },
      n, opts)[0];
  return finish(r, standard_error(second) / den, n);
}

EstimateWithCI estimate_covariance(const PairFn& f, std::uint64_t n, const EstimateOptions& opts) {
  const auto first = run<2>(f, n, opts);
  const double mx = first[0].mean, my = first[1].mean;
  const auto second = run<1>(
      [&](RngSpec rng) {
        const auto x = f(rng);
        return std::array<double, 1>{(x[0] - mx) * (x[1] - my)};
      },
      n, opts)[0];
  const double nn = static_cast<double>(n);
  return finish(second.mean * nn / (nn - 1.0), standard_error(second), n);
}

// ---------------------------------------------------------------------------------------

void write_samples_csv(std::ostream& out, const PairSampler& sampler, std::uint64_t n,
                       std::uint64_t seed) {
  out << "tau1,tau2,equal,cause1,cause2\n";
  for (std::uint64_t k = 0; k < n; ++k) {
    const auto p = sampler.draw(RngSpec{seed, k});
    out << fmt::format("{:.17g},{:.17g},{},{},{}\n", p.tau1, p.tau2, p.equal ? 1 : 0,
                       cause_name(p.cause1), cause_name(p.cause2));
  }
}

void write_samples_csv(std::ostream& out, const SystemSampler& sampler, std::uint64_t n,
                       std::uint64_t seed) {
  const auto& sys = sampler.system();
  std::string header;
  for (int i = 1; i <= sys.n(); ++i) header += fmt::format("tau{},", i);
  header += "all_equal";
  for (int i = 1; i <= sys.n(); ++i) header += fmt::format(",cause{}", i);
  out << header << '\n';
  for (std::uint64_t k = 0; k < n; ++k) {
    const auto s = sampler.draw(RngSpec{seed, k});
    std::string row;
    for (double t : s.tau) row += fmt::format("{:.17g},", t);
    row += s.all_equal ? "1" : "0";
    // Cause: member list of the winning shock, e.g. 1+3.
    for (std::size_t c : s.cause) {
      row += ',';
      if (c >= sys.shocks().size()) {
        row += "none";
        continue;
      }
      const auto& members = sys.shocks()[c].members;
      for (std::size_t j = 0; j < members.size(); ++j) {
        row += (j ? "+" : "") + std::to_string(members[j]);
      }
    }
    out << row << '\n';
  }
}

double ks_statistic(std::vector<double>& xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

double ks_statistic(std::vector<double>& a, std::vector<double>& b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

double ks_critical_1pct(std::uint64_t n, std::uint64_t m) {
  // sqrt(-ln(0.005) / 2)
  const double c = std::sqrt(-std::log(0.005) / 2.0);
  const double nn = static_cast<double>(n);
  if (m == 0) return c / std::sqrt(nn);
  const double mm = static_cast<double>(m);
  return c * std::sqrt((nn + mm) / (nn * mm));
}

}  // namespace simulstop
