#include "simulstop/intensity.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <sstream>

#include "simulstop/error.hpp"
#include "simulstop/quadrature.hpp"
#include "simulstop/rng.hpp"

namespace simulstop {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kKnotStep = 0.5;
constexpr double kMaxIdentityExtent = 8192.0;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_number(const std::string& text, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("path CSV line " + std::to_string(line) + ": not a number: '" + text +
                      "'");
  }
}

}  // namespace

// ---------------------------------------------------------------------------------------
// StatePath

StatePath::StatePath(std::vector<double> grid, std::vector<double> values,
                     Interpolation interpolation)
    : grid_(std::move(grid)), values_(std::move(values)), interpolation_(interpolation) {
  if (grid_.size() < 2) throw InvalidArgument("state path needs at least two grid points");
  if (grid_.size() != values_.size()) {
    throw InvalidArgument("state path grid and values differ in length");
  }
  if (grid_.front() != 0.0) throw InvalidArgument("state path grid must start at 0");
  for (std::size_t i = 1; i < grid_.size(); ++i) {
    if (!(grid_[i] > grid_[i - 1])) {
      throw InvalidArgument("state path grid must be strictly increasing");
    }
  }
  for (double v : values_) {
    if (!std::isfinite(v)) throw InvalidArgument("state path values must be finite");
  }
}

double StatePath::value_at(double t) const {
  if (t < 0.0 || t > horizon()) throw HorizonExceeded("time outside the state path horizon");
  const auto it = std::upper_bound(grid_.begin(), grid_.end(), t);
  const std::size_t k = std::min<std::size_t>(it - grid_.begin() - 1, grid_.size() - 2);
  if (interpolation_ == Interpolation::PiecewiseConstantLeft) {
    return t >= grid_[k + 1] ? values_[k + 1] : values_[k];
  }
  const double w = (t - grid_[k]) / (grid_[k + 1] - grid_[k]);
  return values_[k] + w * (values_[k + 1] - values_[k]);
}

StatePath StatePath::read_csv(std::istream& in, Interpolation interpolation) {
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::vector<double> grid;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw ConfigError("path CSV line " + std::to_string(line_no) + ": expected two columns");
    }
    const std::string a = trim(line.substr(0, comma));
    const std::string b = trim(line.substr(comma + 1));
    if (b.find(',') != std::string::npos) {
      throw ConfigError("path CSV line " + std::to_string(line_no) + ": expected two columns");
    }
    if (!header_seen) {
      header_seen = true;
      if (a != "time" || b != "value") {
        throw ConfigError("path CSV must start with the header row 'time,value'");
      }
      continue;
    }
    grid.push_back(parse_number(a, line_no));
    values.push_back(parse_number(b, line_no));
  }
  if (!header_seen) throw ConfigError("path CSV is empty");
  try {
    return StatePath(std::move(grid), std::move(values), interpolation);
  } catch (const InvalidArgument& e) {
    throw ConfigError(std::string("path CSV: ") + e.what());
  }
}

StatePath StatePath::read_csv(const std::filesystem::path& file, Interpolation interpolation) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open path file " + file.string());
  return read_csv(in, interpolation);
}

void StatePath::write_csv(std::ostream& out) const {
  out << "time,value\n";
  char buf[64];
  for (std::size_t i = 0; i < grid_.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g,", grid_[i]);
    out << buf;
    std::snprintf(buf, sizeof buf, "%.17g\n", values_[i]);
    out << buf;
  }
}

StatePath simulate_ou_path(const OuParams& p, std::uint64_t seed) {
  if (!(p.theta > 0.0)) throw InvalidArgument("OU theta must be positive");
  if (!(p.sigma >= 0.0)) throw InvalidArgument("OU sigma must be nonnegative");
  if (!(p.horizon > 0.0) || !(p.dt > 0.0)) {
    throw InvalidArgument("OU horizon and dt must be positive");
  }
  if (p.dt > p.horizon) throw InvalidArgument("OU dt must not exceed the horizon");
  const auto steps = static_cast<std::size_t>(std::ceil(p.horizon / p.dt - 1e-9));
  std::vector<double> grid(steps + 1);
  std::vector<double> values(steps + 1);
  std::mt19937_64 engine(seed);
  std::normal_distribution<double> normal;
  grid[0] = 0.0;
  values[0] = p.x0;
  for (std::size_t k = 1; k <= steps; ++k) {
    grid[k] = k == steps ? p.horizon : static_cast<double>(k) * p.dt;
    const double h = grid[k] - grid[k - 1];
    const double x = values[k - 1];
    values[k] = x + p.theta * (p.mu - x) * h + p.sigma * std::sqrt(h) * normal(engine);
  }
  return StatePath(std::move(grid), std::move(values));
}

std::vector<StatePath> simulate_ou_ensemble(const OuParams& params, std::size_t count,
                                            std::uint64_t seed) {
  std::vector<StatePath> paths;
  paths.reserve(count);
  for (std::size_t k = 0; k < count; ++k) paths.push_back(simulate_ou_path(params, mix(seed, k)));
  return paths;
}

// ---------------------------------------------------------------------------------------
// Shape

Shape Shape::affine(double a, double b) {
  Shape s;
  s.kind_ = Kind::Affine;
  s.params_ = {a, b};
  return s;
}

Shape Shape::sin_squared(double a, double b) {
  if (!(a >= 0.0) || !(b >= 0.0)) throw InvalidArgument("sin_squared shape needs a, b >= 0");
  Shape s;
  s.kind_ = Kind::SinSquared;
  s.params_ = {a, b};
  return s;
}

Shape Shape::exponential(double a, double b) {
  if (!(a >= 0.0)) throw InvalidArgument("exponential shape needs a >= 0");
  Shape s;
  s.kind_ = Kind::Exponential;
  s.params_ = {a, b};
  return s;
}

Shape Shape::table(std::vector<double> xs, std::vector<double> ys) {
  if (xs.empty() || xs.size() != ys.size()) {
    throw InvalidArgument("shape table needs matching nonempty x and y columns");
  }
  for (std::size_t i = 1; i < xs.size(); ++i) {
    if (!(xs[i] > xs[i - 1])) throw InvalidArgument("shape table x must be strictly increasing");
  }
  for (double y : ys) {
    if (!(y >= 0.0) || !std::isfinite(y)) {
      throw InvalidArgument("shape table rates must be finite and nonnegative");
    }
  }
  Shape s;
  s.kind_ = Kind::Table;
  s.xs_ = std::move(xs);
  s.ys_ = std::move(ys);
  return s;
}

Shape Shape::custom(std::function<double(double)> fn, std::string label) {
  if (!fn) throw InvalidArgument("custom shape needs a callable");
  Shape s;
  s.kind_ = Kind::Custom;
  s.fn_ = std::move(fn);
  s.label_ = std::move(label);
  return s;
}

double Shape::operator()(double x) const {
  double r = 0.0;
  switch (kind_) {
    case Kind::Affine:
      r = std::max(0.0, params_[0] + params_[1] * x);
      break;
    case Kind::SinSquared: {
      const double sx = std::sin(x);
      r = params_[0] + params_[1] * sx * sx;
      break;
    }
    case Kind::Exponential:
      r = params_[0] * std::exp(params_[1] * x);
      break;
    case Kind::Table: {
      if (x <= xs_.front()) return ys_.front();
      if (x >= xs_.back()) return ys_.back();
      const auto it = std::upper_bound(xs_.begin(), xs_.end(), x);
      const std::size_t k = static_cast<std::size_t>(it - xs_.begin()) - 1;
      const double w = (x - xs_[k]) / (xs_[k + 1] - xs_[k]);
      return ys_[k] + w * (ys_[k + 1] - ys_[k]);
    }
    case Kind::Custom:
      r = fn_(x);
      break;
  }
  if (!(r >= 0.0) || !std::isfinite(r)) {
    throw NumericError("intensity shape produced a negative or non-finite rate");
  }
  return r;
}

bool Shape::identically_zero() const {
  switch (kind_) {
    case Kind::Affine:
      return params_[0] <= 0.0 && params_[1] == 0.0;
    case Kind::SinSquared:
      return params_[0] == 0.0 && params_[1] == 0.0;
    case Kind::Exponential:
      return params_[0] == 0.0;
    case Kind::Table:
      return std::all_of(ys_.begin(), ys_.end(), [](double y) { return y == 0.0; });
    case Kind::Custom:
      return false;
  }
  return false;
}

// ---------------------------------------------------------------------------------------
// IntensityModel

IntensityModel IntensityModel::constant(double rate) {
  if (!(rate >= 0.0) || !std::isfinite(rate)) {
    throw InvalidArgument("constant intensity must be finite and nonnegative");
  }
  return IntensityModel(Constant{rate});
}

IntensityModel IntensityModel::proportional(IntensityModel base, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw InvalidArgument("proportional factor must be positive");
  }
  return IntensityModel(
      Proportional{std::make_shared<const IntensityModel>(std::move(base)), factor});
}

IntensityModel IntensityModel::path_driven(Shape shape) {
  return IntensityModel(PathDriven{std::move(shape)});
}

IntensityModel::Kind IntensityModel::kind() const noexcept {
  return static_cast<Kind>(v_.index());
}

double IntensityModel::rate() const {
  if (const auto* c = std::get_if<Constant>(&v_)) return c->rate;
  throw InvalidArgument("intensity model is not constant");
}

double IntensityModel::factor() const {
  if (const auto* p = std::get_if<Proportional>(&v_)) return p->factor;
  throw InvalidArgument("intensity model is not proportional");
}

const IntensityModel& IntensityModel::base() const {
  if (const auto* p = std::get_if<Proportional>(&v_)) return *p->base;
  throw InvalidArgument("intensity model is not proportional");
}

const Shape& IntensityModel::shape() const {
  if (const auto* p = std::get_if<PathDriven>(&v_)) return p->shape;
  throw InvalidArgument("intensity model is not path driven");
}

double IntensityModel::rate_at_state(double x) const {
  switch (kind()) {
    case Kind::Constant:
      return rate();
    case Kind::Proportional:
      return factor() * base().rate_at_state(x);
    case Kind::PathDriven:
      return shape()(x);
  }
  return 0.0;
}

bool IntensityModel::depends_on_state() const {
  switch (kind()) {
    case Kind::Constant:
      return false;
    case Kind::Proportional:
      return base().depends_on_state();
    case Kind::PathDriven:
      return true;
  }
  return false;
}

bool IntensityModel::identically_zero() const {
  switch (kind()) {
    case Kind::Constant:
      return rate() == 0.0;
    case Kind::Proportional:
      return base().identically_zero();
    case Kind::PathDriven:
      return shape().identically_zero();
  }
  return false;
}

std::optional<double> IntensityModel::constant_rate() const {
  switch (kind()) {
    case Kind::Constant:
      return rate();
    case Kind::Proportional:
      if (auto r = base().constant_rate()) return factor() * *r;
      return std::nullopt;
    case Kind::PathDriven:
      return std::nullopt;
  }
  return std::nullopt;
}

IntensityModel sum_models(std::span<const IntensityModel> models) {
  double total = 0.0;
  bool all_constant = true;
  for (const auto& m : models) {
    if (auto r = m.constant_rate()) {
      total += *r;
    } else {
      all_constant = false;
    }
  }
  if (all_constant) return IntensityModel::constant(total);
  std::vector<IntensityModel> terms(models.begin(), models.end());
  return IntensityModel::path_driven(Shape::custom(
      [terms](double x) {
        double s = 0.0;
        for (const auto& m : terms) s += m.rate_at_state(x);
        return s;
      },
      "sum"));
}

// ---------------------------------------------------------------------------------------
// CompensatorCurve

CompensatorCurve::CompensatorCurve(const IntensityModel& model, const StatePath* path,
                                   double extent)
    : model_(model) {
  const IntensityModel* m = &model;
  while (m->kind() == IntensityModel::Kind::Proportional) {
    scale_ *= m->factor();
    m = &m->base();
  }
  if (m->kind() == IntensityModel::Kind::Constant) {
    kind_ = Repr::Constant;
    rate_ = scale_ * m->rate();
    extent_ = kInf;
    return;
  }
  if (path == nullptr) {
    kind_ = Repr::Identity;
    const auto cells = static_cast<std::size_t>(std::ceil(std::max(extent, kKnotStep) / kKnotStep));
    extent_ = static_cast<double>(cells) * kKnotStep;
    times_.resize(cells + 1);
    cumulative_.assign(cells + 1, 0.0);
    auto f = [this](double t) { return shape_rate(t); };
    quadrature::Budget budget;
    for (std::size_t k = 0; k <= cells; ++k) times_[k] = static_cast<double>(k) * kKnotStep;
    for (std::size_t k = 1; k <= cells; ++k) {
      auto r = quadrature::gauss_kronrod21(f, times_[k - 1], times_[k]);
      if (r.abs_error > 1e-12 * std::max(1.0, std::abs(r.value))) {
        r = quadrature::integrate(f, times_[k - 1], times_[k], 1e-13, budget);
      }
      cumulative_[k] = cumulative_[k - 1] + r.value;
    }
    return;
  }
  kind_ = Repr::Grid;
  interpolation_ = path->interpolation();
  times_ = path->grid();
  extent_ = path->horizon();
  rates_.resize(times_.size());
  for (std::size_t k = 0; k < times_.size(); ++k) {
    const double r = scale_ * m->shape()(path->values()[k]);
    if (!(r >= 0.0) || !std::isfinite(r)) {
      throw InvalidArgument("intensity shape must map every state sample to a finite rate >= 0");
    }
    rates_[k] = r;
  }
  cumulative_.assign(times_.size(), 0.0);
  for (std::size_t k = 1; k < times_.size(); ++k) {
    const double h = times_[k] - times_[k - 1];
    const double area = interpolation_ == StatePath::Interpolation::PiecewiseLinear
                            ? 0.5 * (rates_[k - 1] + rates_[k]) * h
                            : rates_[k - 1] * h;
    cumulative_[k] = cumulative_[k - 1] + area;
  }
}

double CompensatorCurve::shape_rate(double t) const {
  const IntensityModel* m = &model_;
  while (m->kind() == IntensityModel::Kind::Proportional) m = &m->base();
  return scale_ * m->shape()(t);
}

std::size_t CompensatorCurve::cell_of(double s) const {
  const auto it = std::upper_bound(times_.begin(), times_.end(), s);
  const auto k = static_cast<std::size_t>(it - times_.begin());
  return std::min(k == 0 ? 0 : k - 1, times_.size() - 2);
}

std::optional<double> CompensatorCurve::constant_rate() const {
  if (kind_ == Repr::Constant) return rate_;
  return std::nullopt;
}

double CompensatorCurve::rate_at(double s) const {
  if (s < 0.0) throw InvalidArgument("time must be nonnegative");
  switch (kind_) {
    case Repr::Constant:
      return rate_;
    case Repr::Identity:
      return shape_rate(s);
    case Repr::Grid: {
      if (s > extent_) throw HorizonExceeded("time beyond the state path horizon");
      const std::size_t k = cell_of(s);
      if (interpolation_ == StatePath::Interpolation::PiecewiseConstantLeft) {
        return s >= times_[k + 1] ? rates_[k + 1] : rates_[k];
      }
      const double w = (s - times_[k]) / (times_[k + 1] - times_[k]);
      return rates_[k] + w * (rates_[k + 1] - rates_[k]);
    }
  }
  return 0.0;
}

double CompensatorCurve::at(double s) const {
  if (!(s >= 0.0)) throw InvalidArgument("time must be nonnegative");
  switch (kind_) {
    case Repr::Constant:
      if (std::isinf(s)) return rate_ > 0.0 ? kInf : 0.0;
      return rate_ * s;
    case Repr::Identity: {
      auto f = [this](double t) { return shape_rate(t); };
      if (s > extent_) {
        // Off the knot table: integrate the remainder directly.
        if (std::isinf(s)) throw HorizonExceeded("compensator at infinity is not tabulated");
        quadrature::Budget budget;
        return cumulative_.back() + quadrature::integrate(f, extent_, s, 1e-12, budget).value;
      }
      const std::size_t k = cell_of(s);
      if (s == times_[k]) return cumulative_[k];
      auto r = quadrature::gauss_kronrod21(f, times_[k], s);
      if (r.abs_error > 1e-12 * std::max(1.0, std::abs(r.value))) {
        // Kinked shapes (tables, clipped affines) need the adaptive rule.
        quadrature::Budget budget;
        r = quadrature::integrate(f, times_[k], s, 1e-13, budget);
      }
      return cumulative_[k] + r.value;
    }
    case Repr::Grid: {
      if (s > extent_) throw HorizonExceeded("time beyond the state path horizon");
      const std::size_t k = cell_of(s);
      const double tau = s - times_[k];
      if (interpolation_ == StatePath::Interpolation::PiecewiseConstantLeft) {
        return cumulative_[k] + rates_[k] * tau;
      }
      const double h = times_[k + 1] - times_[k];
      return cumulative_[k] + rates_[k] * tau + 0.5 * (rates_[k + 1] - rates_[k]) * tau * tau / h;
    }
  }
  return 0.0;
}

double CompensatorCurve::inverse(double z) const {
  if (!(z >= 0.0)) throw InvalidArgument("compensator level must be nonnegative");
  if (z == 0.0) return 0.0;
  if (kind_ == Repr::Constant) return rate_ > 0.0 ? z / rate_ : kInf;
  if (z > cumulative_.back()) return kInf;
  // First cell whose right end reaches z; A is continuous and nondecreasing.
  const auto it = std::lower_bound(cumulative_.begin(), cumulative_.end(), z);
  const auto right = static_cast<std::size_t>(it - cumulative_.begin());
  double lo = times_[right - 1];
  double hi = times_[right];
  if (kind_ == Repr::Identity) {
    // Safeguarded Newton: the rate is the exact derivative of the compensator.
    double t = 0.5 * (lo + hi);
    for (int iter = 0; iter < 200 && hi - lo > 1e-12; ++iter) {
      const double g = at(t) - z;
      if (g == 0.0) return t;
      if (g > 0.0) {
        hi = t;
      } else {
        lo = t;
      }
      const double r = shape_rate(t);
      double next = r > 0.0 ? t - g / r : 0.5 * (lo + hi);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - t) < 1e-13) return next;
      t = next;
    }
    return 0.5 * (lo + hi);
  }
  while (hi - lo > 1e-12 * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (at(mid) >= z) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

// ---------------------------------------------------------------------------------------
// Diagnostics and curve sets

DivergenceDiagnostic validate_divergence(std::span<const CompensatorCurve* const> curves) {
  DivergenceDiagnostic d;
  double rate = 0.0;
  bool closed = true;
  double extent = kInf;
  for (const auto* c : curves) {
    if (auto r = c->constant_rate()) {
      rate += *r;
    } else {
      closed = false;
      extent = std::min(extent, c->extent());
    }
  }
  if (closed) {
    d.growth_rate = rate;
    d.divergent = rate > 0.0;
    d.message = d.divergent ? "divergent" : "non-divergent: zero intensity";
    return d;
  }
  auto total = [&](double t) {
    double s = 0.0;
    for (const auto* c : curves) s += c->at(t);
    return s;
  };
  const double half = 0.5 * extent;
  d.growth_rate = (total(extent) - total(half)) / half;
  d.divergent = d.growth_rate > 1e-8;
  d.message = d.divergent ? "divergent over the available horizon"
                          : "non-divergent: intensity vanishes on the tail of the horizon";
  return d;
}

DivergenceDiagnostic validate_divergence(const CompensatorCurve& curve) {
  const CompensatorCurve* one[] = {&curve};
  return validate_divergence(std::span<const CompensatorCurve* const>(one));
}

CurveSet build_curves(std::span<const IntensityModel> models, const StatePath* path,
                      std::span<const std::vector<std::size_t>> groups, double threshold) {
  CurveSet set;
  const bool any_state =
      std::any_of(models.begin(), models.end(), [](const auto& m) { return m.depends_on_state(); });
  auto group_total = [&](const std::vector<std::size_t>& g, double t) {
    double s = 0.0;
    for (std::size_t i : g) s += set.curves[i].at(t);
    return s;
  };
  auto min_group = [&](double t) {
    double worst = kInf;
    for (const auto& g : groups) worst = std::min(worst, group_total(g, t));
    return worst;
  };
  auto build = [&](double extent) {
    set.curves.clear();
    set.curves.reserve(models.size());
    for (const auto& m : models) set.curves.emplace_back(m, path, extent);
  };

  if (!any_state) {
    build(0.0);
    set.horizon = kInf;
    set.breaks = {0.0, kInf};
    bool decays = true;
    for (const auto& g : groups) {
      double r = 0.0;
      for (std::size_t i : g) r += *set.curves[i].constant_rate();
      decays = decays && r > 0.0;
    }
    set.tail_bound = decays ? 0.0 : 1.0;
    return set;
  }

  double end = 0.0;
  if (path == nullptr) {
    double extent = 16.0;
    build(extent);
    while (min_group(extent) < threshold && extent < kMaxIdentityExtent) {
      extent *= 2.0;
      build(extent);
    }
    end = extent;
  } else {
    build(0.0);
    end = path->horizon();
  }
  double horizon = end;
  if (groups.empty()) {
    set.tail_bound = 0.0;
  } else if (min_group(end) >= threshold) {
    // Smallest horizon where every group has reached the threshold.
    double lo = 0.0;
    double hi = end;
    for (int i = 0; i < 60 && hi - lo > 1e-9 * std::max(1.0, hi); ++i) {
      const double mid = 0.5 * (lo + hi);
      if (min_group(mid) >= threshold) {
        hi = mid;
      } else {
        lo = mid;
      }
    }
    horizon = hi;
    set.tail_bound = std::exp(-min_group(horizon));
  } else {
    set.tail_bound = std::exp(-min_group(end));
  }
  set.horizon = horizon;
  if (path != nullptr) {
    for (double t : path->grid()) {
      if (t < horizon) set.breaks.push_back(t);
    }
    set.breaks.push_back(horizon);
  } else {
    // Unit cells help the adaptive rule on oscillating shapes.
    for (double t = 0.0; t < horizon; t += 1.0) set.breaks.push_back(t);
    set.breaks.push_back(horizon);
  }
  return set;
}

}  // namespace simulstop
