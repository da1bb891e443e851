#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "simulstop/bivariate.hpp"

namespace simulstop {

// One shock channel: the set of components it hits (1-indexed, sorted) and its intensity.
struct Shock {
  std::vector<int> members;
  IntensityModel model;
};

// tau_i = min over shocks J containing i of eta_J. Absent subsets have zero intensity.
class ShockSystem {
 public:
  static constexpr int kMaxComponents = 12;

  // Members are sorted and deduplicated; a repeated subset is a config error. Shocks are
  // kept in lexicographic order of their member lists.
  ShockSystem(int n, std::vector<Shock> shocks, std::vector<StatePath> paths = {});

  int n() const noexcept { return n_; }
  const std::vector<Shock>& shocks() const noexcept { return shocks_; }
  const std::vector<StatePath>& paths() const noexcept { return paths_; }
  std::uint32_t mask(std::size_t k) const { return masks_.at(k); }
  bool depends_on_state() const;
  // Index of the shock hitting every component, if present.
  std::optional<std::size_t> grand_shock() const;

 private:
  int n_;
  std::vector<Shock> shocks_;
  std::vector<std::uint32_t> masks_;
  std::vector<StatePath> paths_;
};

struct SubsetPattern {
  enum class Kind { Fractional, Multiplicative };  // alpha / |J|, |J| alpha
  Kind kind = Kind::Multiplicative;
  double base_rate = 1.0;
};

// Every nonempty subset of {1..n} with the pattern's constant rate.
ShockSystem pattern_system(int n, const SubsetPattern& pattern);

// Compensators of every shock, one set per state realization; group i collects the shocks
// hitting component i.
std::vector<CurveSet> system_realizations(const ShockSystem& sys);

// E exp(-sum_J A^J(max_{i in J} s_i))
Value joint_survival_n(const ShockSystem& sys, std::span<const double> s);
// E int alpha^{1..n} e^{-sum_J A^J}
Value prob_all_equal(const ShockSystem& sys);
double prob_all_equal_pattern(int n, const SubsetPattern& pattern);
// Components i, j (1-indexed): shocks hitting only i, only j, and both are summed.
BivariateScenario pairwise_scenario(const ShockSystem& sys, int i, int j);

}  // namespace simulstop
