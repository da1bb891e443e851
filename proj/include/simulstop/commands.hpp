#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "simulstop/error.hpp"
#include "simulstop/montecarlo.hpp"
#include "simulstop/scenario_io.hpp"

namespace simulstop {

// A quantity name with its numeric arguments, e.g. "hazard 1 1e-4" or
// "conditional both-before 0.5" (the kind folds into the name: conditional-both-before).
struct QuantityRequest {
  std::string name;
  std::vector<double> args;
};

QuantityRequest parse_quantity(std::string_view text);
// Argument names in order; system survival takes s1..sn.
std::vector<std::string> quantity_arg_names(const QuantityRequest& q, const Scenario* scenario);

struct EvalResult {
  std::string quantity;
  std::vector<std::pair<std::string, double>> inputs;
  double value = 0.0;
  double abs_error = 0.0;
  double ensemble_se = 0.0;
  bool defective = false;
  std::vector<std::pair<std::string, double>> details;  // decomposition parts
};

// scenario may be null only for scenario-free quantities (erfc-h).
EvalResult evaluate(const Scenario* scenario, const QuantityRequest& q);
std::string eval_json(const EvalResult& r);

struct ValidationRow {
  std::string name;
  bool identity = false;  // exact check against a tolerance instead of a z-score
  double closed_form = 0.0;
  double closed_error = 0.0;
  double mc_mean = 0.0;
  double mc_se = 0.0;
  double z_score = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct ValidationReport {
  std::vector<ValidationRow> rows;
  bool pass = false;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
  std::uint64_t ties = 0;
};

struct ValidateOptions {
  std::uint64_t samples = 1000000;
  std::uint64_t seed = 0;
  std::string corrupt_row;  // test fixture: perturbs that row's closed form
  std::size_t chunks = 64;
  unsigned threads = 0;
};

// Closed form against Monte Carlo at fixed points (s = t = 1, eps = 0.5, quadrant (0.5, 1.5]); a row passes
// when |z| <= 3 with z = (closed - mc) / sqrt(se^2 + quadrature error^2).
ValidationReport validate(const Scenario& scenario, const ValidateOptions& opts);
std::string report_json(const ValidationReport& r);
std::string report_table(const ValidationReport& r);

// One row per grid value: param,value,abs_error_estimate,status. The parameter is a
// quantity argument when the name matches one, otherwise a dotted key of the template.
// Failed rows carry the error code in status and the sweep continues.
std::string sweep_csv(std::string_view template_text, Format format,
                      const std::filesystem::path& base_dir, const std::string& param,
                      std::span<const double> grid, const QuantityRequest& q);

void simulate_csv(std::ostream& out, const Scenario& scenario, std::uint64_t samples,
                  std::uint64_t seed);
// Frequency of the all-equal event (tau1 = tau2 for pairs) as {mean, std_error, n, ci99}.
std::string simulate_estimate_json(const Scenario& scenario, std::uint64_t samples,
                                   std::uint64_t seed);

std::string erfc_report_json(std::optional<double> ell_override);

const char* error_code_name(ErrorCode code);

}  // namespace simulstop
