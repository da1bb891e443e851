#include "simulstop/multivariate.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>
#include <string>

#include "detail.hpp"
#include "simulstop/error.hpp"

namespace simulstop {

namespace {

using quadrature::Result;

constexpr double kTol = 1e-12;
constexpr std::size_t kKahanThreshold = 64;

// Sum of exponent terms; compensated once the term count passes the threshold.
class ExponentSum {
 public:
  explicit ExponentSum(std::size_t terms) : kahan_(terms > kKahanThreshold) {}
  void add(double x) {
    if (!kahan_) {
      sum_ += x;
      return;
    }
    const double y = x - carry_;
    const double t = sum_ + y;
    carry_ = (t - sum_) - y;
    sum_ = t;
  }
  double value() const { return sum_; }

 private:
  bool kahan_;
  double sum_ = 0.0;
  double carry_ = 0.0;
};

struct Realizations {
  std::vector<CurveSet> sets;
};

Value average(const Realizations& r, const std::function<Result(const CurveSet&)>& per) {
  std::vector<double> values, errors;
  for (const auto& set : r.sets) {
    const Result x = per(set);
    values.push_back(x.value);
    errors.push_back(x.abs_error);
  }
  Value v;
  v.value = detail::mean(values);
  v.abs_error = detail::mean(errors);
  if (values.size() > 1) {
    v.ensemble_se = std::sqrt(detail::covariance(values, values) / static_cast<double>(values.size()));
  }
  return v;
}

}  // namespace

std::vector<CurveSet> system_realizations(const ShockSystem& sys) {
  std::vector<IntensityModel> models;
  for (const auto& sh : sys.shocks()) models.push_back(sh.model);
  std::vector<std::vector<std::size_t>> groups(sys.n());
  for (std::size_t k = 0; k < sys.shocks().size(); ++k) {
    for (int i : sys.shocks()[k].members) groups[i - 1].push_back(k);
  }
  std::vector<CurveSet> sets;
  if (!sys.depends_on_state() || sys.paths().empty()) {
    sets.push_back(build_curves(models, nullptr, groups));
  } else {
    for (const auto& p : sys.paths()) sets.push_back(build_curves(models, &p, groups));
  }
  return sets;
}

ShockSystem::ShockSystem(int n, std::vector<Shock> shocks, std::vector<StatePath> paths)
    : n_(n), paths_(std::move(paths)) {
  if (n < 2 || n > kMaxComponents) {
    throw ConfigError("component count must lie in [2, " + std::to_string(kMaxComponents) + "]");
  }
  std::map<std::vector<int>, IntensityModel> canon;
  for (auto& sh : shocks) {
    std::sort(sh.members.begin(), sh.members.end());
    sh.members.erase(std::unique(sh.members.begin(), sh.members.end()), sh.members.end());
    if (sh.members.empty()) throw ConfigError("shock with no members");
    if (sh.members.front() < 1 || sh.members.back() > n) {
      throw ConfigError("shock member out of range 1.." + std::to_string(n));
    }
    if (!canon.emplace(sh.members, sh.model).second) throw ConfigError("duplicate shock subset");
  }
  std::vector<bool> covered(n, false);
  for (auto& [members, model] : canon) {
    std::uint32_t m = 0;
    for (int i : members) {
      m |= 1u << (i - 1);
      if (!model.identically_zero()) covered[i - 1] = true;
    }
    shocks_.push_back(Shock{members, model});
    masks_.push_back(m);
  }
  for (int i = 0; i < n; ++i) {
    if (!covered[i]) throw ConfigError("component " + std::to_string(i + 1) + " is hit by no shock");
  }
}

bool ShockSystem::depends_on_state() const {
  return std::any_of(shocks_.begin(), shocks_.end(),
                     [](const Shock& s) { return s.model.depends_on_state(); });
}

std::optional<std::size_t> ShockSystem::grand_shock() const {
  const std::uint32_t all = (1u << n_) - 1u;
  for (std::size_t k = 0; k < masks_.size(); ++k) {
    if (masks_[k] == all) return k;
  }
  return std::nullopt;
}

ShockSystem pattern_system(int n, const SubsetPattern& pattern) {
  if (!(pattern.base_rate > 0.0) || !std::isfinite(pattern.base_rate)) {
    throw InvalidArgument("pattern base rate must be positive");
  }
  if (n < 2 || n > ShockSystem::kMaxComponents) throw InvalidArgument("n must lie in [2, 12]");
  std::vector<Shock> shocks;
  for (std::uint32_t m = 1; m < (1u << n); ++m) {
    std::vector<int> members;
    for (int i = 0; i < n; ++i) {
      if (m & (1u << i)) members.push_back(i + 1);
    }
    const double size = static_cast<double>(members.size());
    const double rate = pattern.kind == SubsetPattern::Kind::Fractional ? pattern.base_rate / size
                                                                        : pattern.base_rate * size;
    shocks.push_back(Shock{std::move(members), IntensityModel::constant(rate)});
  }
  return ShockSystem(n, std::move(shocks));
}

Value joint_survival_n(const ShockSystem& sys, std::span<const double> s) {
  if (s.size() != static_cast<std::size_t>(sys.n())) {
    throw InvalidArgument("expected " + std::to_string(sys.n()) + " times, got " +
                          std::to_string(s.size()));
  }
  for (double x : s) {
    if (!(x >= 0.0)) throw InvalidArgument("times must be nonnegative");
  }
  const Realizations r{system_realizations(sys)};
  return average(r, [&](const CurveSet& set) {
    ExponentSum total(set.curves.size());
    for (std::size_t k = 0; k < set.curves.size(); ++k) {
      double latest = 0.0;
      for (int i : sys.shocks()[k].members) latest = std::max(latest, s[i - 1]);
      total.add(detail::compensator(set.curves[k], latest));
    }
    return Result{std::exp(-total.value()), 0.0, 0};
  });
}

Value prob_all_equal(const ShockSystem& sys) {
  const auto grand = sys.grand_shock();
  if (!grand || sys.shocks()[*grand].model.identically_zero()) return Value{};
  const Realizations r{system_realizations(sys)};
  return average(r, [&](const CurveSet& set) {
    double decay = 0.0;
    for (const auto& c : set.curves) decay += c.constant_rate().value_or(0.0);
    auto f = [&](double u) {
      ExponentSum total(set.curves.size());
      for (const auto& c : set.curves) total.add(c.at(u));
      return set.curves[*grand].rate_at(u) * std::exp(-total.value());
    };
    return detail::integrate_on(set, f, 0.0, detail::kInf, decay, kTol);
  });
}

double prob_all_equal_pattern(int n, const SubsetPattern& pattern) {
  if (n < 2 || n > ShockSystem::kMaxComponents) throw InvalidArgument("n must lie in [2, 12]");
  if (pattern.kind == SubsetPattern::Kind::Multiplicative) return std::ldexp(1.0, 1 - n);
  // (1/n) / sum_k C(n, k) / k
  double binom = 1.0, denom = 0.0;
  for (int k = 1; k <= n; ++k) {
    binom = binom * (n - k + 1) / k;
    denom += binom / k;
  }
  return 1.0 / (n * denom);
}

BivariateScenario pairwise_scenario(const ShockSystem& sys, int i, int j) {
  if (i < 1 || j < 1 || i > sys.n() || j > sys.n() || i == j) {
    throw InvalidArgument("pair indices must be distinct and lie in 1.." + std::to_string(sys.n()));
  }
  const std::uint32_t bi = 1u << (i - 1), bj = 1u << (j - 1);
  std::vector<IntensityModel> only_i, only_j, both;
  for (std::size_t k = 0; k < sys.shocks().size(); ++k) {
    const std::uint32_t m = sys.mask(k);
    const auto& model = sys.shocks()[k].model;
    if ((m & bi) && (m & bj)) {
      both.push_back(model);
    } else if (m & bi) {
      only_i.push_back(model);
    } else if (m & bj) {
      only_j.push_back(model);
    }
  }
  BivariateScenario sc;
  sc.alpha1 = sum_models(only_i);
  sc.alpha2 = sum_models(only_j);
  sc.alpha3 = sum_models(both);
  sc.paths = sys.paths();
  return sc;
}

}  // namespace simulstop
