#include "simulstop/scenario_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>
#include <yaml-cpp/yaml.h>

#include "simulstop/error.hpp"

namespace simulstop {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// ---------------------------------------------------------------------------------------
// Conversions. Every document is read as a YAML tree; JSON input is converted first.

YAML::Node to_yaml(const json& j) {
  switch (j.type()) {
    case json::value_t::object: {
      YAML::Node n(YAML::NodeType::Map);
      for (const auto& [k, v] : j.items()) n[k] = to_yaml(v);
      return n;
    }
    case json::value_t::array: {
      YAML::Node n(YAML::NodeType::Sequence);
      for (const auto& v : j) n.push_back(to_yaml(v));
      return n;
    }
    case json::value_t::number_integer: return YAML::Node(fmt::format("{}", j.get<std::int64_t>()));
    case json::value_t::number_unsigned: return YAML::Node(fmt::format("{}", j.get<std::uint64_t>()));
    case json::value_t::number_float: return YAML::Node(fmt::format("{:.17g}", j.get<double>()));
    case json::value_t::boolean: return YAML::Node(j.get<bool>() ? "true" : "false");
    case json::value_t::string: return YAML::Node(j.get<std::string>());
    default: return YAML::Node(YAML::NodeType::Null);
  }
}

void emit(YAML::Emitter& out, const json& j) {
  switch (j.type()) {
    case json::value_t::object:
      out << YAML::BeginMap;
      for (const auto& [k, v] : j.items()) {
        out << YAML::Key << k << YAML::Value;
        emit(out, v);
      }
      out << YAML::EndMap;
      break;
    case json::value_t::array: {
      const bool flat = std::all_of(j.begin(), j.end(), [](const json& v) { return v.is_primitive(); });
      if (flat) out << YAML::Flow;
      out << YAML::BeginSeq;
      for (const auto& v : j) emit(out, v);
      out << YAML::EndSeq;
      break;
    }
    case json::value_t::number_integer: out << j.get<std::int64_t>(); break;
    case json::value_t::number_unsigned: out << j.get<std::uint64_t>(); break;
    case json::value_t::number_float: out << fmt::format("{:.17g}", j.get<double>()); break;
    case json::value_t::boolean: out << j.get<bool>(); break;
    case json::value_t::string: out << YAML::DoubleQuoted << j.get<std::string>(); break;
    default: out << YAML::Null;
  }
}

YAML::Node read_tree(std::string_view text, Format format) {
  try {
    if (format == Format::Json) return to_yaml(json::parse(text));
    return YAML::Load(std::string(text));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what());
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("malformed YAML: ") + e.what());
  }
}

// ---------------------------------------------------------------------------------------
// Reading helpers

void check_map(const YAML::Node& n, const std::string& where) {
  if (!n.IsMap()) throw ConfigError(where + " must be a mapping");
}

void check_keys(const YAML::Node& n, std::initializer_list<std::string_view> allowed,
                const std::string& where) {
  check_map(n, where);
  for (const auto& kv : n) {
    const auto key = kv.first.as<std::string>();
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError("unknown key '" + key + "' in " + where);
    }
  }
}

const YAML::Node require(const YAML::Node& n, const char* key, const std::string& where) {
  const YAML::Node v = n[key];
  if (!v) throw ConfigError("missing key '" + std::string(key) + "' in " + where);
  return v;
}

template <class T>
T scalar(const YAML::Node& v, const std::string& what) {
  if (!v.IsScalar()) throw ConfigError(what + " must be a scalar");
  try {
    return v.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError("cannot read " + what + " from '" + v.Scalar() + "'");
  }
}

double number(const YAML::Node& n, const char* key, const std::string& where) {
  const double x = scalar<double>(require(n, key, where), where + "." + key);
  if (!std::isfinite(x)) throw ConfigError(where + "." + key + " must be finite");
  return x;
}

std::vector<double> numbers(const YAML::Node& n, const char* key, const std::string& where) {
  const YAML::Node v = require(n, key, where);
  if (!v.IsSequence()) throw ConfigError(where + "." + key + " must be a list");
  std::vector<double> out;
  for (const auto& x : v) out.push_back(scalar<double>(x, where + "." + key));
  return out;
}

Shape read_shape(const YAML::Node& n, const std::string& where) {
  check_map(n, where);
  const auto type = scalar<std::string>(require(n, "type", where), where + ".type");
  if (type == "table") {
    check_keys(n, {"type", "x", "y"}, where);
    return Shape::table(numbers(n, "x", where), numbers(n, "y", where));
  }
  check_keys(n, {"type", "a", "b"}, where);
  const double a = number(n, "a", where), b = number(n, "b", where);
  if (type == "affine") return Shape::affine(a, b);
  if (type == "sin_squared") return Shape::sin_squared(a, b);
  if (type == "exponential") return Shape::exponential(a, b);
  throw ConfigError("unknown shape type '" + type + "' in " + where);
}

// extra: keys owned by the enclosing entry (e.g. "members" of a shock).
IntensityModel read_intensity(const YAML::Node& n, const std::string& where,
                              std::initializer_list<std::string_view> extra = {}) {
  check_map(n, where);
  const auto kind = scalar<std::string>(require(n, "kind", where), where + ".kind");
  auto keys = [&](std::initializer_list<std::string_view> own) {
    std::vector<std::string_view> all(own);
    all.insert(all.end(), extra.begin(), extra.end());
    for (const auto& kv : n) {
      const auto key = kv.first.as<std::string>();
      if (std::find(all.begin(), all.end(), key) == all.end()) {
        throw ConfigError("unknown key '" + key + "' in " + where);
      }
    }
  };
  if (kind == "constant") {
    keys({"kind", "rate"});
    return IntensityModel::constant(number(n, "rate", where));
  }
  if (kind == "proportional") {
    keys({"kind", "factor", "base"});
    return IntensityModel::proportional(read_intensity(require(n, "base", where), where + ".base"),
                                        number(n, "factor", where));
  }
  if (kind == "path_driven") {
    keys({"kind", "shape"});
    return IntensityModel::path_driven(read_shape(require(n, "shape", where), where + ".shape"));
  }
  throw ConfigError("unknown intensity kind '" + kind + "' in " + where);
}

std::vector<StatePath> read_paths(const YAML::Node& n, const fs::path& base, PathSource& src) {
  const std::string where = "paths";
  check_keys(n, {"interpolation", "csv", "ou", "count", "seed", "inline"}, where);
  if (const auto interp = n["interpolation"]) {
    const auto s = scalar<std::string>(interp, "paths.interpolation");
    if (s == "linear") {
      src.interpolation = StatePath::Interpolation::PiecewiseLinear;
    } else if (s == "left") {
      src.interpolation = StatePath::Interpolation::PiecewiseConstantLeft;
    } else {
      throw ConfigError("paths.interpolation must be 'linear' or 'left'");
    }
  }
  const int sources = (n["csv"] ? 1 : 0) + (n["ou"] ? 1 : 0) + (n["inline"] ? 1 : 0);
  if (sources != 1) throw ConfigError("paths needs exactly one of csv, ou, inline");
  if ((n["count"] || n["seed"]) && !n["ou"]) throw ConfigError("paths.count and paths.seed belong to ou");

  std::vector<StatePath> out;
  if (const auto csv = n["csv"]) {
    src.kind = PathSource::Kind::Csv;
    if (!csv.IsSequence() || csv.size() == 0) throw ConfigError("paths.csv must be a nonempty list");
    for (const auto& f : csv) {
      fs::path p = scalar<std::string>(f, "paths.csv");
      if (p.is_relative()) p = base / p;
      p = p.lexically_normal();
      src.csv.push_back(p.string());
      out.push_back(StatePath::read_csv(p, src.interpolation));
    }
  } else if (const auto ou = n["ou"]) {
    src.kind = PathSource::Kind::Ou;
    check_keys(ou, {"theta", "mu", "sigma", "x0", "horizon", "dt"}, "paths.ou");
    src.ou = OuParams{number(ou, "theta", "paths.ou"), number(ou, "mu", "paths.ou"),
                      number(ou, "sigma", "paths.ou"), number(ou, "x0", "paths.ou"),
                      number(ou, "horizon", "paths.ou"), number(ou, "dt", "paths.ou")};
    src.count = n["count"] ? scalar<std::size_t>(n["count"], "paths.count") : 1;
    src.seed = n["seed"] ? scalar<std::uint64_t>(n["seed"], "paths.seed") : 0;
    if (src.count == 0) throw ConfigError("paths.count must be positive");
    out = simulate_ou_ensemble(src.ou, src.count, src.seed);
    if (src.interpolation != StatePath::Interpolation::PiecewiseLinear) {
      for (auto& p : out) p = StatePath(p.grid(), p.values(), src.interpolation);
    }
  } else {
    src.kind = PathSource::Kind::Inline;
    const auto list = n["inline"];
    if (!list.IsSequence() || list.size() == 0) throw ConfigError("paths.inline must be a nonempty list");
    for (const auto& p : list) {
      check_keys(p, {"time", "value"}, "paths.inline entry");
      out.emplace_back(numbers(p, "time", "paths.inline"), numbers(p, "value", "paths.inline"),
                       src.interpolation);
    }
  }
  return out;
}

SubsetPattern read_pattern(const YAML::Node& n) {
  check_keys(n, {"kind", "base_rate"}, "pattern");
  const auto kind = scalar<std::string>(require(n, "kind", "pattern"), "pattern.kind");
  SubsetPattern p;
  if (kind == "fractional") {
    p.kind = SubsetPattern::Kind::Fractional;
  } else if (kind == "multiplicative") {
    p.kind = SubsetPattern::Kind::Multiplicative;
  } else {
    throw ConfigError("pattern.kind must be 'fractional' or 'multiplicative'");
  }
  p.base_rate = number(n, "base_rate", "pattern");
  if (!(p.base_rate > 0.0)) throw ConfigError("pattern.base_rate must be positive");
  return p;
}

Scenario read_scenario(const YAML::Node& root, const fs::path& base) {
  check_keys(root, {"model", "seed", "delta", "intensities", "paths", "n", "shocks", "pattern"},
             "scenario");
  Scenario sc;
  const auto model = scalar<std::string>(require(root, "model", "scenario"), "model");
  if (model == "bivariate") {
    sc.model = Scenario::Model::Bivariate;
  } else if (model == "gumbel") {
    sc.model = Scenario::Model::Gumbel;
  } else if (model == "system") {
    sc.model = Scenario::Model::System;
  } else {
    throw ConfigError("model must be bivariate, gumbel or system");
  }
  if (root["seed"]) sc.seed = scalar<std::uint64_t>(root["seed"], "seed");

  std::vector<StatePath> paths;
  if (root["paths"]) paths = read_paths(root["paths"], base, sc.path_source);

  if (sc.model == Scenario::Model::System) {
    for (const char* k : {"intensities", "delta"}) {
      if (root[k]) throw ConfigError(std::string("key '") + k + "' does not apply to a system");
    }
    const int n = scalar<int>(require(root, "n", "scenario"), "n");
    if (root["shocks"] && root["pattern"]) throw ConfigError("give either shocks or pattern, not both");
    if (root["pattern"]) {
      sc.pattern = read_pattern(root["pattern"]);
      const auto sys = pattern_system(n, *sc.pattern);
      sc.system.emplace(n, sys.shocks(), std::move(paths));
    } else {
      const auto list = require(root, "shocks", "scenario");
      if (!list.IsSequence()) throw ConfigError("shocks must be a list");
      std::vector<Shock> shocks;
      for (std::size_t k = 0; k < list.size(); ++k) {
        const std::string where = fmt::format("shocks[{}]", k);
        const auto entry = list[k];
        check_map(entry, where);
        const auto members = require(entry, "members", where);
        if (!members.IsSequence()) throw ConfigError(where + ".members must be a list");
        std::vector<int> m;
        for (const auto& x : members) m.push_back(scalar<int>(x, where + ".members"));
        shocks.push_back(Shock{m, read_intensity(entry, where, {"members"})});
      }
      sc.system.emplace(n, std::move(shocks), std::move(paths));
    }
    return sc;
  }

  for (const char* k : {"n", "shocks", "pattern"}) {
    if (root[k]) throw ConfigError(std::string("key '") + k + "' applies only to a system");
  }
  const auto in = require(root, "intensities", "scenario");
  check_keys(in, {"alpha1", "alpha2", "alpha3"}, "intensities");
  sc.bivariate.alpha1 = read_intensity(require(in, "alpha1", "intensities"), "intensities.alpha1");
  sc.bivariate.alpha2 = read_intensity(require(in, "alpha2", "intensities"), "intensities.alpha2");
  sc.bivariate.alpha3 = read_intensity(require(in, "alpha3", "intensities"), "intensities.alpha3");
  sc.bivariate.paths = std::move(paths);
  if (sc.model == Scenario::Model::Gumbel) {
    sc.delta = number(root, "delta", "scenario");
    if (!(sc.delta >= 0.0 && sc.delta <= 1.0)) throw ConfigError("delta must lie in [0, 1]");
  } else if (root["delta"]) {
    throw ConfigError("key 'delta' applies only to the gumbel model");
  }
  return sc;
}

// ---------------------------------------------------------------------------------------
// Writing

json shape_json(const Shape& s) {
  switch (s.kind()) {
    case Shape::Kind::Affine: return {{"type", "affine"}, {"a", s.params()[0]}, {"b", s.params()[1]}};
    case Shape::Kind::SinSquared:
      return {{"type", "sin_squared"}, {"a", s.params()[0]}, {"b", s.params()[1]}};
    case Shape::Kind::Exponential:
      return {{"type", "exponential"}, {"a", s.params()[0]}, {"b", s.params()[1]}};
    case Shape::Kind::Table: return {{"type", "table"}, {"x", s.xs()}, {"y", s.ys()}};
    case Shape::Kind::Custom: break;
  }
  throw ConfigError("shape '" + s.label() + "' has no file representation");
}

json intensity_json(const IntensityModel& m) {
  switch (m.kind()) {
    case IntensityModel::Kind::Constant: return {{"kind", "constant"}, {"rate", m.rate()}};
    case IntensityModel::Kind::Proportional:
      return {{"kind", "proportional"}, {"factor", m.factor()}, {"base", intensity_json(m.base())}};
    case IntensityModel::Kind::PathDriven: return {{"kind", "path_driven"}, {"shape", shape_json(m.shape())}};
  }
  throw ConfigError("unknown intensity kind");
}

json paths_json(const PathSource& src, const std::vector<StatePath>& paths) {
  json j;
  const auto interp = paths.empty() ? src.interpolation : paths.front().interpolation();
  j["interpolation"] = interp == StatePath::Interpolation::PiecewiseLinear ? "linear" : "left";
  switch (src.kind) {
    case PathSource::Kind::Csv: j["csv"] = src.csv; break;
    case PathSource::Kind::Ou:
      j["ou"] = {{"theta", src.ou.theta}, {"mu", src.ou.mu},           {"sigma", src.ou.sigma},
                 {"x0", src.ou.x0},       {"horizon", src.ou.horizon}, {"dt", src.ou.dt}};
      j["count"] = src.count;
      j["seed"] = src.seed;
      break;
    default: {
      json list = json::array();
      for (const auto& p : paths) list.push_back({{"time", p.grid()}, {"value", p.values()}});
      j["inline"] = list;
    }
  }
  return j;
}

json scenario_json(const Scenario& sc) {
  json j;
  const std::vector<StatePath>* paths = &sc.bivariate.paths;
  switch (sc.model) {
    case Scenario::Model::Bivariate: j["model"] = "bivariate"; break;
    case Scenario::Model::Gumbel: j["model"] = "gumbel"; break;
    case Scenario::Model::System: j["model"] = "system"; break;
  }
  if (sc.seed) j["seed"] = *sc.seed;
  if (sc.model == Scenario::Model::System) {
    if (!sc.system) throw ConfigError("system scenario without a shock system");
    paths = &sc.system->paths();
    j["n"] = sc.system->n();
    if (sc.pattern) {
      j["pattern"] = {{"kind", sc.pattern->kind == SubsetPattern::Kind::Fractional ? "fractional"
                                                                                 : "multiplicative"},
                      {"base_rate", sc.pattern->base_rate}};
    } else {
      json list = json::array();
      for (const auto& sh : sc.system->shocks()) {
        json e = intensity_json(sh.model);
        e["members"] = sh.members;
        list.push_back(e);
      }
      j["shocks"] = list;
    }
  } else {
    j["intensities"] = {{"alpha1", intensity_json(sc.bivariate.alpha1)},
                        {"alpha2", intensity_json(sc.bivariate.alpha2)},
                        {"alpha3", intensity_json(sc.bivariate.alpha3)}};
    if (sc.model == Scenario::Model::Gumbel) j["delta"] = sc.delta;
  }
  if (sc.path_source.kind != PathSource::Kind::None || !paths->empty()) {
    j["paths"] = paths_json(sc.path_source, *paths);
  }
  return j;
}

// Walks a dotted key path; numeric components index sequences.
YAML::Node locate(YAML::Node node, std::string_view key, const std::string& full) {
  const auto dot = key.find('.');
  const std::string head(key.substr(0, dot));
  YAML::Node child;
  if (node.IsMap()) {
    child = node[head];
  } else if (node.IsSequence()) {
    std::size_t idx = 0;
    try {
      idx = std::stoul(head);
    } catch (const std::exception&) {
      throw ConfigError("parameter '" + full + "' does not exist in the template");
    }
    if (idx < node.size()) child = node[idx];
  }
  if (!child || child.IsNull()) throw ConfigError("parameter '" + full + "' does not exist in the template");
  if (dot == std::string_view::npos) return child;
  return locate(child, key.substr(dot + 1), full);
}

}  // namespace

Scenario parse_scenario(std::string_view text, Format format, const fs::path& base_dir) {
  const YAML::Node root = read_tree(text, format);
  if (!root || root.IsNull()) throw ConfigError("empty scenario");
  try {
    return read_scenario(root, base_dir);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("malformed scenario: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidArgument) throw ConfigError(e.what());
    throw;
  }
}

Scenario load_scenario(const fs::path& file, std::optional<Format> format) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open scenario file " + file.string());
  std::stringstream ss;
  ss << in.rdbuf();
  const Format f = format.value_or(file.extension() == ".json" ? Format::Json : Format::Yaml);
  return parse_scenario(ss.str(), f, fs::absolute(file).parent_path());
}

std::string write_scenario(const Scenario& scenario, Format format) {
  const json j = scenario_json(scenario);
  if (format == Format::Json) return j.dump(2) + "\n";
  YAML::Emitter out;
  emit(out, j);
  return std::string(out.c_str()) + "\n";
}

std::string set_param(std::string_view text, Format format, std::string_view key, double value) {
  YAML::Node root = read_tree(text, format);
  const std::string full(key);
  YAML::Node target = locate(root, key, full);
  if (!target.IsScalar()) throw ConfigError("parameter '" + full + "' is not a scalar");
  target = fmt::format("{:.17g}", value);
  YAML::Emitter out;
  out << root;
  return std::string(out.c_str()) + "\n";
}

}  // namespace simulstop
