// One line per acceptance criterion; exit status 0 only when all pass.
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include <fmt/core.h>

#include "simulstop/bivariate.hpp"
#include "simulstop/commands.hpp"
#include "simulstop/gumbel.hpp"
#include "simulstop/montecarlo.hpp"
#include "simulstop/multivariate.hpp"
#include "simulstop/scenario_io.hpp"

using namespace simulstop;

namespace {

constexpr std::uint64_t kMillion = 1000000;

struct Outcome {
  bool pass = true;
  std::string detail;
  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      if (!detail.empty()) detail += "; ";
      detail += what;
    }
  }
};

int failures = 0;

void criterion(int id, const char* title, bool timed, const std::function<void(Outcome&)>& body) {
  Outcome o;
  const auto start = std::chrono::steady_clock::now();
  try {
    body(o);
  } catch (const std::exception& e) {
    o.pass = false;
    o.detail = std::string("exception: ") + e.what();
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  failures += !o.pass;
  std::string line = fmt::format("criterion {:>2} {}: {}", id, o.pass ? "PASS" : "FAIL", title);
  if (timed) line += fmt::format(" [{:.2f} s]", secs);
  if (!o.detail.empty()) line += " -- " + o.detail;
  std::printf("%s\n", line.c_str());
  std::fflush(stdout);
}

bool within_3se(const EstimateWithCI& e, double expected) { return std::abs(e.mean - expected) <= 3.0 * e.std_error; }

std::string g(double x) { return fmt::format("{:.10g}", x); }

IntensityModel shape(std::function<double(double)> f) { return IntensityModel::path_driven(Shape::custom(std::move(f))); }

double sin2p1(double x) { return 1.0 + std::sin(x) * std::sin(x); }

}  // namespace

int main() {
  criterion(1, "same-intensity identity 1/3 (quadrature and Monte Carlo)", true, [](Outcome& o) {
    std::uint64_t seed = 101;
    for (double a : {0.5, 1.0, 3.0}) {
      const auto sc = BivariateScenario::constants(a, a, a);
      const double q = BivariateModel(sc).prob_equal().value;
      o.require(std::abs(q - 1.0 / 3.0) <= 1e-10, "quadrature at alpha " + g(a) + ": " + g(q));
      const PairSampler s(sc);
      const auto e = estimate([&](RngSpec r) { return s.draw(r).equal ? 1.0 : 0.0; }, kMillion, {seed++, 64, 0});
      o.require(within_3se(e, 1.0 / 3.0), "Monte Carlo at alpha " + g(a) + ": " + g(e.mean));
    }
  });

  criterion(2, "constant-intensity formula on a 27-point grid", false, [](Outcome& o) {
    for (double a1 : {0.3, 1.0, 4.0})
      for (double a2 : {0.5, 2.0, 7.0})
        for (double a3 : {0.1, 1.0, 5.0}) {
          const double q = BivariateModel(BivariateScenario::constants(a1, a2, a3)).prob_equal().value;
          const double closed = a3 / (a1 + a2 + a3);
          o.require(std::abs(q - closed) <= 1e-10, fmt::format("({}, {}, {}): {}", a1, a2, a3, g(q)));
          o.require(prob_equal_constant(a1, a2, a3) == closed, "prob_equal_constant");
        }
  });

  criterion(3, "proportional formula on a 9-point grid, base 1 + sin^2", false, [](Outcome& o) {
    const auto base = IntensityModel::path_driven(Shape::sin_squared(1.0, 1.0));
    for (double a1 : {0.25, 1.0, 3.0})
      for (double a2 : {0.5, 1.5, 4.0}) {
        BivariateScenario sc;
        sc.alpha1 = IntensityModel::proportional(base, a1);
        sc.alpha2 = IntensityModel::proportional(base, a2);
        sc.alpha3 = base;
        const double q = BivariateModel(sc).prob_equal().value;
        o.require(std::abs(q - 1.0 / (a1 + a2 + 1.0)) <= 1e-10, fmt::format("({}, {}): {}", a1, a2, g(q)));
      }
  });

  criterion(4, "decomposition reconstruction and singular mixed difference", false, [](Outcome& o) {
    const BivariateModel m(BivariateScenario::constants(2, 3, 5));
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(0.0, 2.0);
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
      const double s = u(rng), t = u(rng);
      const auto d = m.decompose(s, t);
      worst = std::max(worst, std::abs(d.beta * d.f_aa + (1 - d.beta) * d.f_sing - m.joint_survival(s, t).value));
    }
    o.require(worst <= 1e-8, "reconstruction error " + g(worst));
    const double h = 1e-3;
    double mixed = 0.0;
    auto sing = [&](double a, double b) { return m.singular_part(a, b).value; };
    for (int i = 0; i < 100; ++i) {
      const double s = u(rng), t = u(rng);
      if (std::abs(s - t) < 2 * h) continue;
      mixed = std::max(mixed, std::abs(sing(s + h, t + h) - sing(s + h, t) - sing(s, t + h) + sing(s, t)));
    }
    o.require(mixed <= 1e-6, "mixed difference " + g(mixed));
  });

  criterion(5, "bounds sandwich, 20 randomized scenarios per bound", false, [](Outcome& o) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> times;
    for (int k = 0; k <= 400; ++k) times.push_back(0.05 * k);
    int checked = 0;
    auto sandwich = [&](const BoundSpec& spec, const BivariateScenario& sc, const char* name) {
      const BivariateModel m(sc);
      o.require(satisfies_bound(spec, m, times), std::string(name) + ": scenario outside hypotheses");
      const auto b = prob_equal_bounds(spec);
      const double p = m.prob_equal().value;
      o.require(p >= b.lower && p <= b.upper, fmt::format("{}: {} not in [{}, {}]", name, g(p), g(b.lower), g(b.upper)));
      ++checked;
    };
    for (int trial = 0; trial < 20; ++trial) {
      std::array<double, 3> lo{}, hi{}, w{};
      for (int i = 0; i < 3; ++i) {
        lo[i] = 0.2 + 2.0 * u(rng);
        hi[i] = lo[i] + 0.1 + 2.0 * u(rng);
        w[i] = 0.5 + 3.0 * u(rng);
      }
      auto band = [&](int i) {
        const double l = lo[i], hh = hi[i], om = w[i];
        return shape([=](double x) { return sin2p1(x) * (l + (hh - l) * std::sin(om * x) * std::sin(om * x)); });
      };
      BivariateScenario sc;
      sc.alpha1 = band(0), sc.alpha2 = band(1), sc.alpha3 = band(2);
      sandwich(BoundSpec::bounded_intensity(lo, hi, IntensityModel::path_driven(Shape::sin_squared(1, 1))), sc,
               "bounded intensity");
    }
    for (int trial = 0; trial < 20; ++trial) {
      const double l = 0.2 + 2.0 * u(rng);
      const double up = l + 0.1 + 2.0 * u(rng);
      const double S = l + (up - l) * u(rng);
      const double T = 1.0 + 2.0 * u(rng), ramp = 0.1;
      const double c = S / (2.0 * T + ramp);
      const double r3 = 0.2 + 2.0 * u(rng);
      BivariateScenario sc;
      sc.alpha1 = IntensityModel::path_driven(Shape::table({T, T + ramp}, {c, 0.0}));
      sc.alpha2 = sc.alpha1;
      sc.alpha3 = IntensityModel::path_driven(Shape::table({T + ramp, T + 2 * ramp}, {0.0, r3}));
      sandwich(BoundSpec::bounded_sum_compensators(l, up), sc, "bounded compensator sum");
    }
    for (int trial = 0; trial < 20; ++trial) {
      const double l = 0.1 + 2.0 * u(rng);
      const double up = l + 0.1 + 2.0 * u(rng);
      const double split = 0.1 + 0.8 * u(rng);
      const double om = 0.5 + 3.0 * u(rng);
      auto k = [=](double x) { return l + (up - l) * std::sin(om * x) * std::sin(om * x); };
      BivariateScenario sc;
      sc.alpha3 = IntensityModel::path_driven(Shape::sin_squared(1, 1));
      sc.alpha1 = shape([=](double x) { return split * k(x) * sin2p1(x); });
      sc.alpha2 = shape([=](double x) { return (1 - split) * k(x) * sin2p1(x); });
      sandwich(BoundSpec::compensator_ratio(l, up), sc, "compensator ratio");
    }
    for (int trial = 0; trial < 20; ++trial) {
      const double l = 0.1 + 2.0 * u(rng);
      const double up = l + 0.05 + 0.9 * u(rng);
      const double om = 0.5 + 3.0 * u(rng);
      const double a = 0.3 + u(rng), b = 0.3 + u(rng);
      auto k = [=](double x) { return l + (up - l) * std::sin(om * x) * std::sin(om * x); };
      auto f1 = [=](double x) { return a * (1.5 + std::sin(x)); };
      auto f2 = [=](double x) { return b * (1.0 + std::cos(2 * x) * std::cos(2 * x)); };
      BivariateScenario sc;
      sc.alpha1 = shape(f1), sc.alpha2 = shape(f2);
      sc.alpha3 = shape([=](double x) { return k(x) * (f1(x) + f2(x)); });
      sandwich(BoundSpec::intensity_vs_sum(l, up), sc, "intensity vs sum");
    }
    o.require(checked == 80, "scenario count");
  });

  criterion(6, "conditional probabilities: limit and Monte Carlo", false, [](Outcome& o) {
    const BivariateModel m(BivariateScenario::constants(0.8, 1.2, 0.6));
    const double t_far = 31.0 / 2.6;  // total compensator 31
    const double gap = std::abs(m.prob_equal_and_before(t_far).value - m.prob_equal().value);
    o.require(gap < 1e-8, "limit gap " + g(gap));
    const PairSampler s(m.scenario());
    const double t = 0.7;
    const auto given1 = estimate_ratio(
        [&](RngSpec r) {
          const auto p = s.draw(r);
          const double hit = p.tau1 <= t ? 1.0 : 0.0;
          return std::array{p.equal ? hit : 0.0, hit};
        },
        kMillion, {601, 64, 0});
    o.require(within_3se(given1, m.prob_equal_given_tau1_before(t).value), "given tau1 before: " + g(given1.mean));
    const auto both = estimate_ratio(
        [&](RngSpec r) {
          const auto p = s.draw(r);
          const double hit = (p.tau1 <= t && p.tau2 <= t) ? 1.0 : 0.0;
          return std::array{p.equal ? hit : 0.0, hit};
        },
        kMillion, {602, 64, 0});
    o.require(within_3se(both, m.prob_equal_given_both_before(t).value), "given both before: " + g(both.mean));
  });

  criterion(7, "joint hazard ratio at eps 1e-4 within 5e-4 of alpha3", false, [](Outcome& o) {
    const BivariateModel m(BivariateScenario::constants(2, 3, 5));
    const double r = m.joint_hazard_ratio(1.0, 1e-4).value;
    o.require(std::abs(r - 5.0) <= 5e-4, fmt::format("ratio {} differs from 5 by {}", g(r), g(std::abs(r - 5.0))));
  });

  criterion(8, "distance metrics", false, [](Outcome& o) {
    const BivariateModel mo(BivariateScenario::constants(1, 1, 1));
    const double d0 = std::abs(mo.prob_within_eps(0.0).value - mo.prob_equal().value);
    o.require(d0 <= 1e-10, "within-eps(0) gap " + g(d0));
    const double l2 = BivariateModel(BivariateScenario::constants(1, 1, 0)).l2_distance_sq().value;
    o.require(std::abs(l2 - 2.0) <= 1e-8, "independent l2 " + g(l2));
    const PairSampler s(mo.scenario());
    const auto e = estimate(
        [&](RngSpec r) {
          const auto p = s.draw(r);
          return (p.tau1 - p.tau2) * (p.tau1 - p.tau2);
        },
        kMillion, {801, 64, 0});
    o.require(within_3se(e, mo.l2_distance_sq().value), "Monte Carlo l2 " + g(e.mean));
  });

  criterion(9, "multivariate all-equal probability", false, [](Outcome& o) {
    const SubsetPattern mult{SubsetPattern::Kind::Multiplicative, 1.0};
    const SubsetPattern frac{SubsetPattern::Kind::Fractional, 1.0};
    for (int n = 2; n <= 8; ++n) {
      const double p = prob_all_equal_pattern(n, mult);
      o.require(std::abs(p - std::ldexp(1.0, 1 - n)) <= 1e-10, fmt::format("pattern n={}: {}", n, g(p)));
    }
    for (int n = 2; n <= 6; ++n)
      for (const auto& pat : {mult, frac}) {
        const double q = prob_all_equal(pattern_system(n, pat)).value;
        o.require(std::abs(q - prob_all_equal_pattern(n, pat)) <= 1e-9, fmt::format("explicit n={}: {}", n, g(q)));
      }
    std::uint64_t seed = 901;
    for (int n : {2, 3, 4}) {
      const SystemSampler s(pattern_system(n, mult));
      const auto e = estimate([&](RngSpec r) { return s.draw(r).all_equal ? 1.0 : 0.0; }, kMillion, {seed++, 64, 0});
      o.require(within_3se(e, std::ldexp(1.0, 1 - n)), fmt::format("Monte Carlo n={}: {}", n, g(e.mean)));
    }
  });

  criterion(10, "Gumbel reduction at delta 0 and domination", false, [](Outcome& o) {
    std::mt19937_64 rng(10);
    std::uniform_real_distribution<double> u(0.1, 4.0), t(0.0, 3.0);
    double worst = 0.0;
    for (int i = 0; i < 50; ++i) {
      const auto sc = BivariateScenario::constants(u(rng), u(rng), u(rng));
      const BivariateModel mo(sc);
      const GumbelModel g0(GumbelScenario{sc, 0.0});
      const double s = t(rng), r = t(rng);
      worst = std::max(worst, std::abs(g0.joint_survival(s, r).value - mo.joint_survival(s, r).value));
      worst = std::max(worst, std::abs(g0.prob_equal().value - mo.prob_equal().value));
    }
    o.require(worst <= 1e-12, "reduction gap " + g(worst));
    for (double l : {0.5, 1.0, 3.0})
      for (double l3 : {0.2, 1.0, 5.0})
        for (double d : {0.1, 0.5, 1.0}) {
          const auto dom = gumbel_prob_equal_dominated(l, 2.0 * l, l3, d);
          const double quad = GumbelModel(GumbelScenario{BivariateScenario::constants(l, 2.0 * l, l3), d}).prob_equal().value;
          o.require(dom.value <= dom.mo_value && quad <= l3 / (3.0 * l + l3),
                    fmt::format("({}, {}, {}, delta {}): {}", l, 2 * l, l3, d, g(quad)));
        }
  });

  criterion(11, "negative covariance for Gumbel (2,2,1) at delta 1", true, [](Outcome& o) {
    const double c = gumbel_covariance_constant(2, 2, 1).value;
    o.require(c < 0.0, "quadrature covariance " + g(c));
    const PairSampler s(GumbelScenario{BivariateScenario::constants(2, 2, 1), 1.0});
    const auto e = estimate_covariance(
        [&](RngSpec r) {
          const auto p = s.draw(r);
          return std::array{p.tau1, p.tau2};
        },
        10 * kMillion, {1101, 64, 0});
    o.require(e.mean < 0.0 && std::abs(e.mean) > 3.0 * e.std_error,
              fmt::format("Monte Carlo covariance {} (se {})", g(e.mean), g(e.std_error)));
    o.detail = o.detail.empty() ? fmt::format("quadrature {}, Monte Carlo {} +- {}", g(c), g(e.mean), g(e.std_error))
                                : o.detail;
  });

  criterion(12, "erfc bound constants and feasibility of ell = 5/4", false, [](Outcome& o) {
    const auto rep = erfc_bound_optimize();
    o.require(std::abs(rep.ell - 1.27935) <= 1e-4, fmt::format("ell* = {} is not 1.27935 +- 1e-4", g(rep.ell)));
    o.require(std::abs(rep.x_star - 1.2043) <= 1e-3, "x* = " + g(rep.x_star));
    o.require(std::abs(rep.h_max - 0.00131266) <= 1e-5, "h_max = " + g(rep.h_max));
    bool ok = true;
    for (int i = 0; i < 10000; ++i) ok = ok && erfc_bound_h(1.0 + 9.0 * i / 9999.0, 1.25) >= 0.0;
    o.require(ok, "h(x, 5/4) negative on the grid");
  });

  criterion(13, "validate on the three reference scenarios, seed 42", true, [](Outcome& o) {
    const std::filesystem::path dir = SIMULSTOP_SCENARIO_DIR;
    for (const char* name : {"mo_constants.yaml", "gumbel_221.yaml", "system_n3.yaml"}) {
      const Scenario sc = load_scenario(dir / name);
      ValidateOptions opts;
      opts.samples = kMillion;
      opts.seed = 42;
      const auto a = validate(sc, opts);
      for (const auto& row : a.rows) o.require(row.pass, fmt::format("{}: row {} z {}", name, row.name, g(row.z_score)));
      o.require(a.pass, std::string(name) + " failed");
      opts.threads = 4;
      o.require(report_json(validate(sc, opts)) == report_json(a), std::string(name) + " not deterministic");
    }
  });

  std::printf("%d of 13 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
