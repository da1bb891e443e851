#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "simulstop/gumbel.hpp"
#include "simulstop/intensity.hpp"
#include "simulstop/multivariate.hpp"

namespace simulstop {

// Where the state paths of a scenario come from; kept so files round-trip.
struct PathSource {
  enum class Kind { None, Csv, Ou, Inline };
  Kind kind = Kind::None;
  StatePath::Interpolation interpolation = StatePath::Interpolation::PiecewiseLinear;
  std::vector<std::string> csv;  // absolute after loading
  OuParams ou;
  std::size_t count = 1;
  std::uint64_t seed = 0;
};

struct Scenario {
  enum class Model { Bivariate, Gumbel, System };
  Model model = Model::Bivariate;
  std::optional<std::uint64_t> seed;
  BivariateScenario bivariate;  // also the base of the Gumbel model
  double delta = 0.0;
  std::optional<ShockSystem> system;
  std::optional<SubsetPattern> pattern;  // set when the system was given as a pattern
  PathSource path_source;

  GumbelScenario gumbel() const { return GumbelScenario{bivariate, delta}; }
};

enum class Format { Yaml, Json };

// Relative CSV references resolve against base_dir. Unknown keys are config errors.
Scenario parse_scenario(std::string_view text, Format format,
                        const std::filesystem::path& base_dir = {});
// Format from the extension unless given: .json is JSON, anything else YAML.
Scenario load_scenario(const std::filesystem::path& file, std::optional<Format> format = {});
std::string write_scenario(const Scenario& scenario, Format format);

// Replaces the scalar at a dotted key path (e.g. "intensities.alpha1.rate", "shocks.0.rate")
// and returns the edited document as YAML. Missing keys are config errors.
std::string set_param(std::string_view text, Format format, std::string_view key, double value);

}  // namespace simulstop
