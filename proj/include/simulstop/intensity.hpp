#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace simulstop {

// Background state trajectory X on a time grid starting at 0.
class StatePath {
 public:
  enum class Interpolation { PiecewiseConstantLeft, PiecewiseLinear };

  StatePath(std::vector<double> grid, std::vector<double> values,
            Interpolation interpolation = Interpolation::PiecewiseLinear);

  const std::vector<double>& grid() const noexcept { return grid_; }
  const std::vector<double>& values() const noexcept { return values_; }
  Interpolation interpolation() const noexcept { return interpolation_; }
  double horizon() const noexcept { return grid_.back(); }
  std::size_t size() const noexcept { return grid_.size(); }

  double value_at(double t) const;

  // Two-column CSV with a header row: time,value
  static StatePath read_csv(std::istream& in,
                            Interpolation interpolation = Interpolation::PiecewiseLinear);
  static StatePath read_csv(const std::filesystem::path& file,
                            Interpolation interpolation = Interpolation::PiecewiseLinear);
  void write_csv(std::ostream& out) const;

 private:
  std::vector<double> grid_;
  std::vector<double> values_;
  Interpolation interpolation_;
};

struct OuParams {
  double theta = 1.0;
  double mu = 0.0;
  double sigma = 0.0;
  double x0 = 0.0;
  double horizon = 1.0;
  double dt = 0.01;
};

// Euler-Maruyama discretization of dX = theta (mu - X) dt + sigma dW.
StatePath simulate_ou_path(const OuParams& params, std::uint64_t seed);
std::vector<StatePath> simulate_ou_ensemble(const OuParams& params, std::size_t count,
                                            std::uint64_t seed);

// Map from a state value to a nonnegative rate.
class Shape {
 public:
  enum class Kind { Affine, SinSquared, Exponential, Table, Custom };

  static Shape affine(double a, double b);        // max(0, a + b x)
  static Shape sin_squared(double a, double b);   // a + b sin^2(x)
  static Shape exponential(double a, double b);   // a e^{b x}
  static Shape table(std::vector<double> xs, std::vector<double> ys);  // linear, flat ends
  static Shape custom(std::function<double(double)> fn, std::string label = "custom");

  double operator()(double x) const;

  Kind kind() const noexcept { return kind_; }
  const std::vector<double>& params() const noexcept { return params_; }
  const std::vector<double>& xs() const noexcept { return xs_; }
  const std::vector<double>& ys() const noexcept { return ys_; }
  const std::string& label() const noexcept { return label_; }
  bool identically_zero() const;

 private:
  Shape() = default;
  Kind kind_ = Kind::Affine;
  std::vector<double> params_;
  std::vector<double> xs_;
  std::vector<double> ys_;
  std::function<double(double)> fn_;
  std::string label_;
};

// Rate function alpha(.) >= 0: a constant, a positive multiple of another model, or a
// shape evaluated along the state path.
class IntensityModel {
 public:
  enum class Kind { Constant, Proportional, PathDriven };

  static IntensityModel constant(double rate);
  static IntensityModel proportional(IntensityModel base, double factor);
  static IntensityModel path_driven(Shape shape);

  Kind kind() const noexcept;
  double rate() const;                      // Constant only
  double factor() const;                    // Proportional only
  const IntensityModel& base() const;       // Proportional only
  const Shape& shape() const;               // PathDriven only

  // Rate as a function of the state value.
  double rate_at_state(double x) const;
  bool depends_on_state() const;
  bool identically_zero() const;
  // Constant rate after unwinding proportional chains; nullopt for state-driven models.
  std::optional<double> constant_rate() const;

 private:
  struct Constant {
    double rate;
  };
  struct Proportional {
    std::shared_ptr<const IntensityModel> base;
    double factor;
  };
  struct PathDriven {
    Shape shape;
  };
  explicit IntensityModel(std::variant<Constant, Proportional, PathDriven> v)
      : v_(std::move(v)) {}
  std::variant<Constant, Proportional, PathDriven> v_;
};

// Pointwise sum of models; collapses to a constant when every term is constant.
IntensityModel sum_models(std::span<const IntensityModel> models);

// A_s = int_0^s alpha(X_r) dr for one model along one state realization. Without a path
// the clock is X_t = t. Closed-form models have infinite extent; tabulated ones are
// valid on [0, extent()].
class CompensatorCurve {
 public:
  // extent is used only when the model is driven by the identity clock.
  explicit CompensatorCurve(const IntensityModel& model, const StatePath* path = nullptr,
                            double extent = 64.0);

  double at(double s) const;
  double rate_at(double s) const;
  // A^{-1}(z); +inf when z exceeds the curve (beyond extent or non-divergent).
  double inverse(double z) const;

  double extent() const noexcept { return extent_; }
  bool closed_form() const noexcept { return kind_ == Repr::Constant; }
  // True when the curve is tabulated along a finite state path.
  bool path_bound() const noexcept { return kind_ == Repr::Grid; }
  std::optional<double> constant_rate() const;
  const std::vector<double>& grid() const noexcept { return times_; }
  const IntensityModel& model() const noexcept { return model_; }

 private:
  enum class Repr { Constant, Identity, Grid };
  double shape_rate(double t) const;
  std::size_t cell_of(double s) const;

  IntensityModel model_;
  Repr kind_ = Repr::Constant;
  double scale_ = 1.0;
  double rate_ = 0.0;
  double extent_ = 0.0;
  StatePath::Interpolation interpolation_ = StatePath::Interpolation::PiecewiseLinear;
  std::vector<double> times_;
  std::vector<double> rates_;
  std::vector<double> cumulative_;
};

struct DivergenceDiagnostic {
  bool divergent = true;
  double growth_rate = 0.0;  // mean slope of A over the tail half of the available horizon
  std::string message;
};

DivergenceDiagnostic validate_divergence(const CompensatorCurve& curve);
// Same test applied to the sum of several curves sharing one clock.
DivergenceDiagnostic validate_divergence(std::span<const CompensatorCurve* const> curves);

// Curves for several models on one state realization, extended far enough that every
// listed group of compensators has total at least `threshold` at the horizon.
struct CurveSet {
  std::vector<CompensatorCurve> curves;
  double horizon = 0.0;          // +inf when every curve is closed form
  std::vector<double> breaks;    // integration breakpoints in [0, horizon]
  double tail_bound = 0.0;       // max over groups of exp(-group total at horizon)
};

inline constexpr double kGroupThreshold = 50.0;

CurveSet build_curves(std::span<const IntensityModel> models, const StatePath* path,
                      std::span<const std::vector<std::size_t>> groups,
                      double threshold = kGroupThreshold);

}  // namespace simulstop
