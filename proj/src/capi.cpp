#include "simulstop/simulstop.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <sstream>
#include <string>

#include "simulstop/commands.hpp"
#include "simulstop/error.hpp"

struct simulstop_scenario {
  simulstop::Scenario scenario;
};

namespace {

using namespace simulstop;

thread_local std::string g_last_error;

simulstop_status status_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::Config: return SIMULSTOP_ERR_CONFIG;
    case ErrorCode::InvalidArgument: return SIMULSTOP_ERR_INVALID_ARGUMENT;
    case ErrorCode::Numeric: return SIMULSTOP_ERR_NUMERIC;
    case ErrorCode::BudgetExceeded: return SIMULSTOP_ERR_BUDGET_EXCEEDED;
    case ErrorCode::HorizonExceeded: return SIMULSTOP_ERR_HORIZON_EXCEEDED;
    case ErrorCode::UnsupportedScenario: return SIMULSTOP_ERR_UNSUPPORTED_SCENARIO;
    case ErrorCode::UndefinedConditional: return SIMULSTOP_ERR_UNDEFINED_CONDITIONAL;
    case ErrorCode::Io: return SIMULSTOP_ERR_IO;
  }
  return SIMULSTOP_ERR_INTERNAL;
}

template <class F>
simulstop_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return SIMULSTOP_OK;
  } catch (const Error& e) {
    g_last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown failure";
  }
  return SIMULSTOP_ERR_INTERNAL;
}

char* duplicate(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void require(const void* p, const char* what) {
  if (!p) throw InvalidArgument(std::string(what) + " must not be NULL");
}

std::optional<Format> format_of(simulstop_format f) {
  switch (f) {
    case SIMULSTOP_FORMAT_YAML: return Format::Yaml;
    case SIMULSTOP_FORMAT_JSON: return Format::Json;
    default: return std::nullopt;
  }
}

}  // namespace

extern "C" {

const char* simulstop_version(void) { return "1.0.0"; }

const char* simulstop_last_error(void) { return g_last_error.c_str(); }

const char* simulstop_status_name(simulstop_status status) {
  switch (status) {
    case SIMULSTOP_OK: return "ok";
    case SIMULSTOP_ERR_CONFIG: return "config";
    case SIMULSTOP_ERR_INVALID_ARGUMENT: return "invalid-argument";
    case SIMULSTOP_ERR_NUMERIC: return "numeric";
    case SIMULSTOP_ERR_BUDGET_EXCEEDED: return "budget-exceeded";
    case SIMULSTOP_ERR_HORIZON_EXCEEDED: return "horizon-exceeded";
    case SIMULSTOP_ERR_UNSUPPORTED_SCENARIO: return "unsupported-scenario";
    case SIMULSTOP_ERR_UNDEFINED_CONDITIONAL: return "undefined-conditional";
    case SIMULSTOP_ERR_IO: return "io";
    case SIMULSTOP_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

int simulstop_is_config_error(simulstop_status status) {
  return status == SIMULSTOP_ERR_CONFIG || status == SIMULSTOP_ERR_INVALID_ARGUMENT ||
         status == SIMULSTOP_ERR_UNSUPPORTED_SCENARIO || status == SIMULSTOP_ERR_IO;
}

void simulstop_free(char* text) { std::free(text); }

simulstop_status simulstop_scenario_load(const char* path, simulstop_format format,
                                         simulstop_scenario** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = nullptr;
    *out = new simulstop_scenario{load_scenario(path, format_of(format))};
  });
}

simulstop_status simulstop_scenario_parse(const char* text, simulstop_format format,
                                          const char* base_dir, simulstop_scenario** out) {
  return guarded([&] {
    require(text, "text");
    require(out, "out");
    *out = nullptr;
    const Format f = format_of(format).value_or(Format::Yaml);
    *out = new simulstop_scenario{parse_scenario(text, f, base_dir ? base_dir : "")};
  });
}

simulstop_status simulstop_scenario_constants(double alpha1, double alpha2, double alpha3,
                                              simulstop_scenario** out) {
  return guarded([&] {
    require(out, "out");
    *out = nullptr;
    Scenario sc;
    sc.bivariate = BivariateScenario::constants(alpha1, alpha2, alpha3);
    *out = new simulstop_scenario{std::move(sc)};
  });
}

void simulstop_scenario_free(simulstop_scenario* scenario) { delete scenario; }

simulstop_status simulstop_scenario_write(const simulstop_scenario* scenario,
                                          simulstop_format format, char** out) {
  return guarded([&] {
    require(scenario, "scenario");
    require(out, "out");
    *out = duplicate(write_scenario(scenario->scenario, format_of(format).value_or(Format::Yaml)));
  });
}

simulstop_status simulstop_prob_equal(const simulstop_scenario* scenario, double* value,
                                      double* abs_error) {
  return guarded([&] {
    require(scenario, "scenario");
    require(value, "value");
    const char* q = scenario->scenario.model == Scenario::Model::System ? "prob-all-equal" : "prob-equal";
    const auto r = evaluate(&scenario->scenario, parse_quantity(q));
    *value = r.value;
    if (abs_error) *abs_error = r.abs_error;
  });
}

simulstop_status simulstop_joint_survival(const simulstop_scenario* scenario, const double* times,
                                          size_t count, double* value, double* abs_error) {
  return guarded([&] {
    require(scenario, "scenario");
    require(times, "times");
    require(value, "value");
    QuantityRequest q{"survival", std::vector<double>(times, times + count)};
    const auto r = evaluate(&scenario->scenario, q);
    *value = r.value;
    if (abs_error) *abs_error = r.abs_error;
  });
}

simulstop_status simulstop_eval(const simulstop_scenario* scenario, const char* quantity,
                                char** json_out) {
  return guarded([&] {
    require(quantity, "quantity");
    require(json_out, "json_out");
    const auto r = evaluate(scenario ? &scenario->scenario : nullptr, parse_quantity(quantity));
    *json_out = duplicate(eval_json(r));
  });
}

simulstop_status simulstop_validate(const simulstop_scenario* scenario, uint64_t samples,
                                    uint64_t seed, const char* corrupt_row, char** json_out,
                                    char** table_out, int* passed) {
  return guarded([&] {
    require(scenario, "scenario");
    ValidateOptions opts;
    opts.samples = samples;
    opts.seed = seed;
    if (corrupt_row) opts.corrupt_row = corrupt_row;
    const auto report = validate(scenario->scenario, opts);
    std::string json = report_json(report), table = report_table(report);
    if (json_out) *json_out = duplicate(json);
    if (table_out) *table_out = duplicate(table);
    if (passed) *passed = report.pass ? 1 : 0;
  });
}

simulstop_status simulstop_sweep(const char* template_path, simulstop_format format,
                                 const char* param, const double* grid, size_t count,
                                 const char* quantity, char** csv_out) {
  return guarded([&] {
    require(param, "param");
    require(quantity, "quantity");
    require(csv_out, "csv_out");
    if (count > 0) require(grid, "grid");
    std::string text;
    Format f = Format::Yaml;
    std::filesystem::path base;
    if (template_path) {
      const std::filesystem::path file(template_path);
      std::ifstream in(file);
      if (!in) throw IoError("cannot open scenario file " + file.string());
      std::stringstream ss;
      ss << in.rdbuf();
      text = ss.str();
      f = format_of(format).value_or(file.extension() == ".json" ? Format::Json : Format::Yaml);
      base = std::filesystem::absolute(file).parent_path();
    }
    *csv_out = duplicate(sweep_csv(text, f, base, param, std::span<const double>(grid, count),
                                   parse_quantity(quantity)));
  });
}

simulstop_status simulstop_simulate(const simulstop_scenario* scenario, uint64_t samples,
                                    uint64_t seed, int as_estimate, char** out) {
  return guarded([&] {
    require(scenario, "scenario");
    require(out, "out");
    if (as_estimate) {
      *out = duplicate(simulate_estimate_json(scenario->scenario, samples, seed));
      return;
    }
    std::ostringstream ss;
    simulate_csv(ss, scenario->scenario, samples, seed);
    *out = duplicate(ss.str());
  });
}

simulstop_status simulstop_erfc_report(const double* ell_override, char** json_out) {
  return guarded([&] {
    require(json_out, "json_out");
    *json_out = duplicate(
        erfc_report_json(ell_override ? std::optional<double>(*ell_override) : std::nullopt));
  });
}

}  // extern "C"
