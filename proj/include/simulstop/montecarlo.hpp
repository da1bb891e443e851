#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <vector>

#include "simulstop/bivariate.hpp"
#include "simulstop/gumbel.hpp"
#include "simulstop/multivariate.hpp"
#include "simulstop/rng.hpp"

namespace simulstop {

// Exact draw of A^{-1}(z). Throws HorizonExceeded when z lies beyond a state path.
double sample_eta(const CompensatorCurve& c, double z);

// Own shock of component 1 or 2, the common shock, or the Gumbel-coupled own shock.
enum class Cause : std::uint8_t { Shock1 = 1, Shock2 = 2, Common = 3, GumbelPair = 4 };

struct SamplePair {
  double tau1 = 0.0;
  double tau2 = 0.0;
  bool equal = false;  // the common shock came strictly first for both components
  Cause cause1 = Cause::Shock1;
  Cause cause2 = Cause::Shock2;
  bool tie = false;    // two distinct shocks drew the same time; broken toward the lower index
};

struct SystemSample {
  std::vector<double> tau;
  std::vector<std::size_t> cause;  // index of the winning shock per component
  bool all_equal = false;          // one shock fired first for every component
  bool tie = false;
};

// Which state realization a sample runs on. Ensemble draws a path index uniformly per
// sample; Fixed pins one path and samples the conditional law.
struct PathChoice {
  enum class Mode { Ensemble, Fixed };
  Mode mode = Mode::Ensemble;
  std::size_t index = 0;
};

// Sample k of a run with seed s uses the generator SplitMix64(RngSpec{s, k}).
class PairSampler {
 public:
  explicit PairSampler(const BivariateScenario& sc, PathChoice paths = {});
  explicit PairSampler(const GumbelScenario& gs, PathChoice paths = {});

  SamplePair draw(RngSpec rng) const;
  std::uint64_t ties() const noexcept { return ties_.load(); }

 private:
  const CurveSet& pick(SplitMix64& gen) const;

  BivariateModel model_;
  std::optional<double> delta_;  // set for the Gumbel coupling
  PathChoice paths_;
  mutable std::atomic<std::uint64_t> ties_{0};
};

class SystemSampler {
 public:
  explicit SystemSampler(const ShockSystem& sys, PathChoice paths = {});

  SystemSample draw(RngSpec rng) const;
  std::uint64_t ties() const noexcept { return ties_.load(); }
  const ShockSystem& system() const noexcept { return sys_; }

 private:
  ShockSystem sys_;
  std::vector<CurveSet> sets_;
  PathChoice paths_;
  mutable std::atomic<std::uint64_t> ties_{0};
};

SamplePair sample_mo_pair(const BivariateScenario& sc, RngSpec rng);
SamplePair sample_gumbel_pair(const GumbelScenario& gs, RngSpec rng);
SystemSample sample_system(const ShockSystem& sys, RngSpec rng);

// Z2 given Z1 = s under survival e^{-s-t-delta s t}: solves (1 + delta t) e^{-t(1 + delta s)} = u.
double gumbel_conditional_inverse(double s, double u, double delta);

struct EstimateWithCI {
  double mean = 0.0;
  double std_error = 0.0;
  std::uint64_t n = 0;
  double ci99_halfwidth = 0.0;  // 2.576 std_error
};

struct EstimateOptions {
  std::uint64_t seed = 0;
  std::size_t chunks = 64;
  // Worker threads; 0 reads SIMULSTOP_THREADS and falls back to the hardware count.
  unsigned threads = 0;
};

// Value of the functional on sample k, drawn from stream k.
using SampleFn = std::function<double(RngSpec)>;
using PairFn = std::function<std::array<double, 2>(RngSpec)>;

// Mean of f over samples 0..n-1. Each chunk runs Welford in index order and the chunk
// summaries merge pairwise in chunk order, so a fixed (seed, chunks) is bit-reproducible.
EstimateWithCI estimate(const SampleFn& f, std::uint64_t n, const EstimateOptions& opts);
// E[num] / E[den] for f = (num, den); the second pass estimates num - r den, giving a
// delta-method standard error. Throws UndefinedConditional when no sample hits den.
EstimateWithCI estimate_ratio(const PairFn& f, std::uint64_t n, const EstimateOptions& opts);
// Cov(x, y) for f = (x, y); the second pass recentres on the first-pass means.
EstimateWithCI estimate_covariance(const PairFn& f, std::uint64_t n, const EstimateOptions& opts);

unsigned resolve_threads(unsigned requested);

// Raw sample export: tau columns, an equality flag, and cause codes.
void write_samples_csv(std::ostream& out, const PairSampler& sampler, std::uint64_t n,
                       std::uint64_t seed);
void write_samples_csv(std::ostream& out, const SystemSampler& sampler, std::uint64_t n,
                       std::uint64_t seed);

// Largest gap between the empirical CDF of xs and cdf (xs is sorted in place).
double ks_statistic(std::vector<double>& xs, const std::function<double(double)>& cdf);
// Two-sample statistic; both inputs are sorted in place.
double ks_statistic(std::vector<double>& a, std::vector<double>& b);
// Asymptotic critical value at level 1% for sample sizes n and m (m = 0: one-sample).
double ks_critical_1pct(std::uint64_t n, std::uint64_t m = 0);

}  // namespace simulstop
