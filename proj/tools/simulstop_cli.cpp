#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "simulstop/simulstop.h"

namespace {

constexpr int kOk = 0;
constexpr int kCheckFailed = 1;
constexpr int kConfig = 2;
constexpr int kNumeric = 3;

struct Failure {
  int exit_code;
  std::string message;
};

struct Owned {
  char* p = nullptr;
  ~Owned() { simulstop_free(p); }
  std::string str() const { return p ? p : ""; }
};

using ScenarioPtr = std::unique_ptr<simulstop_scenario, decltype(&simulstop_scenario_free)>;

void check(simulstop_status s) {
  if (s == SIMULSTOP_OK) return;
  throw Failure{simulstop_is_config_error(s) ? kConfig : kNumeric,
                std::string(simulstop_status_name(s)) + ": " + simulstop_last_error()};
}

struct Common {
  std::string scenario;
  bool json_input = false;
  std::string out;
  std::string format;
};

simulstop_format input_format(const Common& c) {
  return c.json_input ? SIMULSTOP_FORMAT_JSON : SIMULSTOP_FORMAT_AUTO;
}

ScenarioPtr load(const Common& c) {
  if (c.scenario.empty()) throw Failure{kConfig, "--scenario is required"};
  simulstop_scenario* sc = nullptr;
  check(simulstop_scenario_load(c.scenario.c_str(), input_format(c), &sc));
  return ScenarioPtr(sc, &simulstop_scenario_free);
}

void emit(const Common& c, const std::string& text) {
  if (c.out.empty()) {
    std::cout << text;
    if (!text.empty() && text.back() != '\n') std::cout << '\n';
    return;
  }
  std::ofstream f(c.out, std::ios::binary);
  f << text;
  if (!text.empty() && text.back() != '\n') f << '\n';
  if (!f) throw Failure{kConfig, "io: cannot write " + c.out};
}

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string join(const std::vector<std::string>& words) {
  std::string q;
  for (const auto& w : words) q += (q.empty() ? "" : " ") + w;
  return q;
}

std::string render_eval(const std::string& json_text, const std::string& format) {
  if (format.empty() || format == "json") return json_text;
  const auto j = nlohmann::json::parse(json_text);
  std::vector<std::pair<std::string, double>> fields;
  for (const auto& [k, v] : j["inputs"].items()) fields.emplace_back(k, v.get<double>());
  fields.emplace_back("value", j["value"].get<double>());
  fields.emplace_back("abs_error_estimate", j["abs_error_estimate"].get<double>());
  if (j.contains("details")) {
    for (const auto& [k, v] : j["details"].items()) fields.emplace_back(k, v.get<double>());
  }
  std::string out;
  if (format == "csv") {
    std::string head = "quantity", row = j["quantity"].get<std::string>();
    for (const auto& [k, v] : fields) head += "," + k, row += "," + num(v);
    return head + "\n" + row + "\n";
  }
  out = "quantity            " + j["quantity"].get<std::string>() + "\n";
  for (const auto& [k, v] : fields) {
    std::string key = k;
    key.resize(std::max<std::size_t>(20, k.size() + 1), ' ');
    out += key + num(v) + "\n";
  }
  return out;
}

void require_format(const std::string& format, std::initializer_list<const char*> allowed) {
  if (format.empty()) return;
  for (const char* a : allowed) {
    if (format == a) return;
  }
  throw Failure{kConfig, "--format " + format + " is not available for this command"};
}

// "a:b:step" or a comma list.
std::vector<double> parse_grid(const std::string& spec) {
  auto to_double = [&](const std::string& s) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != s.size()) throw Failure{kConfig, "bad grid value '" + s + "'"};
    return v;
  };
  std::vector<double> grid;
  if (spec.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() != 3) throw Failure{kConfig, "grid range must be start:stop:step"};
    const double a = to_double(parts[0]), b = to_double(parts[1]), h = to_double(parts[2]);
    if (!(h > 0.0) || !(b >= a)) throw Failure{kConfig, "grid range needs step > 0 and stop >= start"};
    const auto n = static_cast<long>(std::floor((b - a) / h + 1e-9));
    if (n > 10000000) throw Failure{kConfig, "grid too large"};
    for (long i = 0; i <= n; ++i) grid.push_back(a + static_cast<double>(i) * h);
    return grid;
  }
  std::stringstream ss(spec);
  for (std::string p; std::getline(ss, p, ',');) grid.push_back(to_double(p));
  if (grid.empty()) throw Failure{kConfig, "empty grid"};
  return grid;
}

void add_common(CLI::App* cmd, Common& c, bool with_scenario = true) {
  if (with_scenario) {
    cmd->add_option("--scenario", c.scenario, "scenario file (YAML; .json files are read as JSON)");
    cmd->add_flag("--json", c.json_input, "read the scenario file as JSON regardless of extension");
  }
  cmd->add_option("--out", c.out, "write the result to this file instead of stdout");
  cmd->add_option("--format", c.format, "json, csv or table")
      ->check(CLI::IsMember({"json", "csv", "table"}));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simultaneous stopping times: closed forms and Monte Carlo validation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(simulstop_version()));

  Common c;
  std::vector<std::string> quantity;
  std::uint64_t samples = 1000000;
  std::optional<std::uint64_t> seed;
  std::string corrupt, param, grid;
  std::optional<double> ell;

  auto* eval = app.add_subcommand("eval", "evaluate one closed-form quantity");
  add_common(eval, c);
  eval->add_option("quantity", quantity, "e.g. prob-equal | survival 1 2 | conditional both-before 0.5")
      ->required()->allow_extra_args();

  auto* val = app.add_subcommand("validate", "compare every closed form with Monte Carlo");
  add_common(val, c);
  val->add_option("--samples", samples, "Monte Carlo sample count (>= 10000)");
  val->add_option("--seed", seed, "RNG seed")->required();
  val->add_option("--corrupt", corrupt, "perturb the closed form of one row (harness self-test)");

  auto* sweep = app.add_subcommand("sweep", "evaluate a quantity over a parameter grid (CSV)");
  add_common(sweep, c);
  sweep->add_option("--param", param, "quantity argument name or dotted scenario key")->required();
  sweep->add_option("--grid", grid, "start:stop:step or v1,v2,...")->required();
  sweep->add_option("quantity", quantity, "quantity with fixed arguments")->required();

  auto* sim = app.add_subcommand("simulate", "export raw samples (csv) or the equality estimate (json)");
  add_common(sim, c);
  sim->add_option("--samples", samples, "sample count");
  sim->add_option("--seed", seed, "RNG seed")->required();

  auto* erfc = app.add_subcommand("erfc-report", "erfc bound: ell, x*, h(x*) and feasibility");
  add_common(erfc, c, false);
  erfc->add_option("--ell", ell, "use this ell instead of the computed root");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  try {
    if (*eval) {
      require_format(c.format, {"json", "csv", "table"});
      std::optional<ScenarioPtr> sc;
      if (!c.scenario.empty()) sc.emplace(load(c));
      Owned out;
      check(simulstop_eval(sc ? sc->get() : nullptr, join(quantity).c_str(), &out.p));
      emit(c, render_eval(out.str(), c.format));
      return kOk;
    }
    if (*val) {
      require_format(c.format, {"json", "table"});
      auto sc = load(c);
      Owned json, table;
      int passed = 0;
      check(simulstop_validate(sc.get(), samples, *seed, corrupt.empty() ? nullptr : corrupt.c_str(), &json.p,
                               &table.p, &passed));
      if (c.format == "json") {
        emit(c, json.str());
      } else {
        std::cout << table.str();
        if (!c.out.empty()) emit(c, json.str());
      }
      return passed ? kOk : kCheckFailed;
    }
    if (*sweep) {
      require_format(c.format, {"csv"});
      const auto values = parse_grid(grid);
      Owned out;
      check(simulstop_sweep(c.scenario.empty() ? nullptr : c.scenario.c_str(), input_format(c), param.c_str(),
                            values.data(), values.size(), join(quantity).c_str(), &out.p));
      emit(c, out.str());
      return kOk;
    }
    if (*sim) {
      require_format(c.format, {"csv", "json"});
      auto sc = load(c);
      Owned out;
      check(simulstop_simulate(sc.get(), samples, *seed, c.format == "json", &out.p));
      emit(c, out.str());
      return kOk;
    }
    if (*erfc) {
      require_format(c.format, {"json", "table"});
      Owned out;
      check(simulstop_erfc_report(ell ? &*ell : nullptr, &out.p));
      if (c.format == "table") {
        const auto j = nlohmann::json::parse(out.str());
        emit(c, "ell       " + num(j["ell"].get<double>()) + "\nx_star    " + num(j["x_star"].get<double>()) +
                    "\nh_max     " + num(j["h_max"].get<double>()) + "\nfeasible  " +
                    (j["feasible"].get<bool>() ? "true" : "false") + "\n");
      } else {
        emit(c, out.str());
      }
      return kOk;
    }
  } catch (const Failure& f) {
    std::cerr << "simulstop: " << f.message << '\n';
    return f.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "simulstop: internal: " << e.what() << '\n';
    return kNumeric;
  }
  return kConfig;
}
