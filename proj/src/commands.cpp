#include "simulstop/commands.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "simulstop/error.hpp"

namespace simulstop {

namespace {

using json = nlohmann::ordered_json;

std::string lower_name(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

void require_args(const QuantityRequest& q, std::size_t n) {
  if (q.args.size() != n) {
    throw InvalidArgument(fmt::format("quantity '{}' takes {} argument(s), got {}", q.name, n, q.args.size()));
  }
}

int index_arg(double x, const char* what) {
  if (x != std::floor(x) || x < 1.0 || x > 64.0) throw InvalidArgument(std::string(what) + " must be a positive integer");
  return static_cast<int>(x);
}

EvalResult from_value(const Value& v) {
  EvalResult r;
  r.value = v.value;
  r.abs_error = v.abs_error;
  r.ensemble_se = v.ensemble_se;
  r.defective = v.defective;
  return r;
}

bool all_constant(const BivariateScenario& sc) {
  return sc.alpha1.constant_rate() && sc.alpha2.constant_rate() && sc.alpha3.constant_rate();
}

[[noreturn]] void unsupported(const QuantityRequest& q, const char* model) {
  throw UnsupportedScenario(fmt::format("quantity '{}' is not available for the {} model", q.name, model));
}

EvalResult eval_bivariate(const BivariateModel& m, const QuantityRequest& q) {
  const auto& a = q.args;
  if (q.name == "survival") return require_args(q, 2), from_value(m.joint_survival(a[0], a[1]));
  if (q.name == "marginal") return require_args(q, 2), from_value(m.marginal_survival(index_arg(a[0], "i"), a[1]));
  if (q.name == "prob-equal") return require_args(q, 0), from_value(m.prob_equal());
  if (q.name == "beta") return require_args(q, 0), from_value(m.beta());
  if (q.name == "decompose") {
    require_args(q, 2);
    const auto d = m.decompose(a[0], a[1]);
    EvalResult r;
    r.value = d.joint;
    r.abs_error = d.abs_error;
    r.details = {{"beta", d.beta}, {"f_aa", d.f_aa}, {"f_sing", d.f_sing}, {"joint", d.joint}};
    return r;
  }
  if (q.name == "conditional-and-before") return require_args(q, 1), from_value(m.prob_equal_and_before(a[0]));
  if (q.name == "conditional-tau1-before") return require_args(q, 1), from_value(m.prob_equal_given_tau1_before(a[0]));
  if (q.name == "conditional-both-before") return require_args(q, 1), from_value(m.prob_equal_given_both_before(a[0]));
  if (q.name == "quadrant") return require_args(q, 2), from_value(m.quadrant_prob(a[0], a[1]));
  if (q.name == "within-eps") return require_args(q, 1), from_value(m.prob_within_eps(a[0]));
  if (q.name == "hazard") return require_args(q, 2), from_value(m.joint_hazard_ratio(a[0], a[1]));
  if (q.name == "mean") return require_args(q, 1), from_value(m.mean(index_arg(a[0], "i")));
  if (q.name == "l2") return require_args(q, 0), from_value(m.l2_distance_sq());
  if (q.name == "covariance") return require_args(q, 0), from_value(m.covariance());
  unsupported(q, "bivariate");
}

Value gumbel_covariance(const GumbelScenario& gs) {
  if (!all_constant(gs.base) || gs.delta != 1.0) {
    throw UnsupportedScenario("Gumbel covariance by quadrature needs constant intensities and delta = 1");
  }
  return gumbel_covariance_constant(*gs.base.alpha1.constant_rate(), *gs.base.alpha2.constant_rate(),
                                    *gs.base.alpha3.constant_rate());
}

EvalResult eval_gumbel(const GumbelModel& g, const QuantityRequest& q) {
  const auto& a = q.args;
  if (q.name == "survival") return require_args(q, 2), from_value(g.joint_survival(a[0], a[1]));
  if (q.name == "marginal") return require_args(q, 2), from_value(g.marginal_survival(index_arg(a[0], "i"), a[1]));
  if (q.name == "prob-equal") return require_args(q, 0), from_value(g.prob_equal());
  if (q.name == "covariance") return require_args(q, 0), from_value(gumbel_covariance(g.scenario()));
  unsupported(q, "gumbel");
}

EvalResult eval_system(const ShockSystem& sys, const QuantityRequest& q) {
  if (q.name == "survival") return require_args(q, sys.n()), from_value(joint_survival_n(sys, q.args));
  if (q.name == "prob-all-equal") return require_args(q, 0), from_value(prob_all_equal(sys));
  if (q.name == "pair-prob-equal") {
    require_args(q, 2);
    return from_value(prob_equal(pairwise_scenario(sys, index_arg(q.args[0], "i"), index_arg(q.args[1], "j"))));
  }
  unsupported(q, "system");
}

std::string num(double x) { return fmt::format("{:.17g}", x); }

}  // namespace

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Config: return "config";
    case ErrorCode::InvalidArgument: return "invalid-argument";
    case ErrorCode::Numeric: return "numeric";
    case ErrorCode::BudgetExceeded: return "budget-exceeded";
    case ErrorCode::HorizonExceeded: return "horizon-exceeded";
    case ErrorCode::UnsupportedScenario: return "unsupported-scenario";
    case ErrorCode::UndefinedConditional: return "undefined-conditional";
    case ErrorCode::Io: return "io";
  }
  return "unknown";
}

QuantityRequest parse_quantity(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::vector<std::string> tokens;
  for (std::string t; in >> t;) tokens.push_back(t);
  if (tokens.empty()) throw InvalidArgument("empty quantity");
  QuantityRequest q;
  q.name = lower_name(tokens[0]);
  std::size_t first = 1;
  if (q.name == "conditional") {
    if (tokens.size() < 2) throw InvalidArgument("conditional needs a kind: and-before, tau1-before, both-before");
    q.name += "-" + lower_name(tokens[1]);
    first = 2;
  }
  for (std::size_t i = first; i < tokens.size(); ++i) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(tokens[i], &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != tokens[i].size()) throw InvalidArgument("not a number: '" + tokens[i] + "'");
    q.args.push_back(x);
  }
  return q;
}

std::vector<std::string> quantity_arg_names(const QuantityRequest& q, const Scenario* scenario) {
  const auto& n = q.name;
  if (n == "survival" && scenario && scenario->model == Scenario::Model::System && scenario->system) {
    std::vector<std::string> names;
    for (int i = 1; i <= scenario->system->n(); ++i) names.push_back(fmt::format("s{}", i));
    return names;
  }
  if (n == "survival" || n == "decompose" || n == "quadrant") return {"s", "t"};
  if (n == "marginal") return {"i", "s"};
  if (n.rfind("conditional-", 0) == 0) return {"t"};
  if (n == "within-eps") return {"eps"};
  if (n == "hazard") return {"t", "eps"};
  if (n == "mean") return {"i"};
  if (n == "pair-prob-equal") return {"i", "j"};
  if (n == "erfc-h") return {"x", "ell"};
  return {};
}

EvalResult evaluate(const Scenario* scenario, const QuantityRequest& q) {
  EvalResult r;
  if (q.name == "erfc-h") {
    if (q.args.size() != 1 && q.args.size() != 2) throw InvalidArgument("erfc-h takes x [ell]");
    const double ell = q.args.size() == 2 ? q.args[1] : erfc_bound_ell_star();
    r.value = erfc_bound_h(q.args[0], ell);
    r.abs_error = 1e-15;
  } else {
    if (!scenario) throw ConfigError("quantity '" + q.name + "' needs a scenario");
    switch (scenario->model) {
      case Scenario::Model::Bivariate: r = eval_bivariate(BivariateModel(scenario->bivariate), q); break;
      case Scenario::Model::Gumbel: r = eval_gumbel(GumbelModel(scenario->gumbel()), q); break;
      case Scenario::Model::System: r = eval_system(*scenario->system, q); break;
    }
  }
  r.quantity = q.name;
  const auto names = quantity_arg_names(q, scenario);
  for (std::size_t i = 0; i < q.args.size(); ++i) {
    r.inputs.emplace_back(i < names.size() ? names[i] : fmt::format("arg{}", i + 1), q.args[i]);
  }
  return r;
}

std::string eval_json(const EvalResult& r) {
  json j;
  j["quantity"] = r.quantity;
  j["inputs"] = json::object();
  for (const auto& [k, v] : r.inputs) j["inputs"][k] = v;
  j["value"] = r.value;
  j["abs_error_estimate"] = r.abs_error;
  if (r.ensemble_se > 0.0) j["ensemble_se"] = r.ensemble_se;
  if (r.defective) j["defective"] = true;
  for (const auto& [k, v] : r.details) j["details"][k] = v;
  return j.dump(2);
}

// ---------------------------------------------------------------------------------------
// Validation

namespace {

class Battery {
 public:
  Battery(const ValidateOptions& opts) : opts_(opts) {}

  void mc(const std::string& name, const Value& closed, const SampleFn& f) {
    add(name, closed, estimate(f, opts_.samples, options()));
  }
  void ratio(const std::string& name, const Value& closed, const PairFn& f) {
    add(name, closed, estimate_ratio(f, opts_.samples, options()));
  }
  void covariance(const std::string& name, const Value& closed, const PairFn& f) {
    add(name, closed, estimate_covariance(f, opts_.samples, options()));
  }
  void identity(const std::string& name, double a, double b, double tol) {
    ValidationRow row;
    row.name = name;
    row.identity = true;
    row.closed_form = corrupt(name, a);
    row.mc_mean = b;  // reference side of the identity
    row.tolerance = tol;
    row.z_score = row.closed_form - b;
    row.pass = std::abs(row.z_score) <= tol;
    rows.push_back(row);
  }
  // One-sided check a <= b.
  void at_most(const std::string& name, double a, double b) {
    ValidationRow row;
    row.name = name;
    row.identity = true;
    row.closed_form = corrupt(name, a);
    row.mc_mean = b;
    row.z_score = std::max(0.0, row.closed_form - b);
    row.pass = row.closed_form <= b;
    rows.push_back(row);
  }

  std::vector<ValidationRow> rows;

 private:
  EstimateOptions options() const { return {opts_.seed, opts_.chunks, opts_.threads}; }

  double corrupt(const std::string& name, double x) const {
    return name == opts_.corrupt_row ? 1.1 * x + 0.01 : x;
  }

  void add(const std::string& name, const Value& closed, const EstimateWithCI& e) {
    ValidationRow row;
    row.name = name;
    row.closed_form = corrupt(name, closed.value);
    row.closed_error = closed.abs_error;
    row.mc_mean = e.mean;
    row.mc_se = e.std_error;
    const double scale = std::hypot(e.std_error, closed.abs_error);
    const double diff = row.closed_form - e.mean;
    row.z_score = scale > 0.0 ? diff / scale : (diff == 0.0 ? 0.0 : std::copysign(INFINITY, diff));
    row.tolerance = 3.0;
    row.pass = std::abs(row.z_score) <= 3.0;
    rows.push_back(row);
  }

  ValidateOptions opts_;
};

double ind(bool b) { return b ? 1.0 : 0.0; }

void bivariate_battery(Battery& b, const BivariateModel& m) {
  const PairSampler s(m.scenario());
  const double s0 = 1.0, t0 = 1.0, eps = 0.5;
  b.mc("prob-equal", m.prob_equal(), [&](RngSpec r) { return ind(s.draw(r).equal); });
  b.mc("survival", m.joint_survival(s0, t0), [&](RngSpec r) {
    const auto p = s.draw(r);
    return ind(p.tau1 > s0 && p.tau2 > t0);
  });
  b.mc("marginal-1", m.marginal_survival(1, s0), [&](RngSpec r) { return ind(s.draw(r).tau1 > s0); });
  b.mc("marginal-2", m.marginal_survival(2, s0), [&](RngSpec r) { return ind(s.draw(r).tau2 > s0); });
  // both in (0.5, 1.5]
  b.mc("quadrant", m.quadrant_prob(0.5 * s0, 1.5 * t0), [&](RngSpec r) {
    const auto p = s.draw(r);
    auto in = [&](double x) { return x > 0.5 * s0 && x <= 1.5 * t0; };
    return ind(in(p.tau1) && in(p.tau2));
  });
  b.mc("within-eps", m.prob_within_eps(eps), [&](RngSpec r) {
    const auto p = s.draw(r);
    return ind(std::abs(p.tau1 - p.tau2) <= eps);
  });
  b.mc("conditional-and-before", m.prob_equal_and_before(t0), [&](RngSpec r) {
    const auto p = s.draw(r);
    return ind(p.equal && p.tau1 <= t0);
  });
  b.ratio("conditional-tau1-before", m.prob_equal_given_tau1_before(t0), [&](RngSpec r) {
    const auto p = s.draw(r);
    const double hit = ind(p.tau1 <= t0);
    return std::array{p.equal ? hit : 0.0, hit};
  });
  b.ratio("conditional-both-before", m.prob_equal_given_both_before(t0), [&](RngSpec r) {
    const auto p = s.draw(r);
    const double hit = ind(p.tau1 <= t0 && p.tau2 <= t0);
    return std::array{p.equal ? hit : 0.0, hit};
  });
  if (!m.defective()) {
    b.mc("l2", m.l2_distance_sq(), [&](RngSpec r) {
      const auto p = s.draw(r);
      return (p.tau1 - p.tau2) * (p.tau1 - p.tau2);
    });
    b.covariance("covariance", m.covariance(), [&](RngSpec r) {
      const auto p = s.draw(r);
      return std::array{p.tau1, p.tau2};
    });
  }
  b.identity("within-eps-zero", m.prob_within_eps(0.0).value, m.prob_equal().value, 1e-10);
  if (m.deterministic()) {
    const auto d = m.decompose(s0, 0.5 * t0);
    b.identity("decomposition", d.beta * d.f_aa + (1.0 - d.beta) * d.f_sing, d.joint, 1e-8);
  }
}

void gumbel_battery(Battery& b, const GumbelModel& g) {
  const PairSampler s(g.scenario());
  const double s0 = 1.0, t0 = 1.0;
  b.mc("prob-equal", g.prob_equal(), [&](RngSpec r) { return ind(s.draw(r).equal); });
  b.mc("survival", g.joint_survival(s0, t0), [&](RngSpec r) {
    const auto p = s.draw(r);
    return ind(p.tau1 > s0 && p.tau2 > t0);
  });
  b.mc("marginal-1", g.marginal_survival(1, s0), [&](RngSpec r) { return ind(s.draw(r).tau1 > s0); });
  b.mc("marginal-2", g.marginal_survival(2, s0), [&](RngSpec r) { return ind(s.draw(r).tau2 > s0); });
  const auto& base = g.scenario().base;
  if (all_constant(base) && g.delta() == 1.0) {
    b.covariance("covariance", gumbel_covariance(g.scenario()), [&](RngSpec r) {
      const auto p = s.draw(r);
      return std::array{p.tau1, p.tau2};
    });
  }
  b.at_most("domination", g.prob_equal().value, g.base().prob_equal().value + 1e-12);
}

void system_battery(Battery& b, const Scenario& sc) {
  const ShockSystem& sys = *sc.system;
  const SystemSampler s(sys);
  const int n = sys.n();
  b.mc("prob-all-equal", prob_all_equal(sys), [&](RngSpec r) { return ind(s.draw(r).all_equal); });
  const std::vector<double> ones(n, 1.0);
  b.mc("survival", joint_survival_n(sys, ones), [&](RngSpec r) {
    const auto x = s.draw(r);
    return ind(std::all_of(x.tau.begin(), x.tau.end(), [](double t) { return t > 1.0; }));
  });
  int pairs = 0;
  for (int i = 1; i <= n && pairs < 3; ++i) {
    for (int j = i + 1; j <= n && pairs < 3; ++j, ++pairs) {
      b.mc(fmt::format("pair-equal-{}-{}", i, j), prob_equal(pairwise_scenario(sys, i, j)),
           [&, i, j](RngSpec r) {
             const auto x = s.draw(r);
             return ind(x.cause[i - 1] == x.cause[j - 1]);
           });
    }
  }
  if (sc.pattern) {
    b.identity("pattern", prob_all_equal(sys).value, prob_all_equal_pattern(n, *sc.pattern), 1e-9);
  }
}

}  // namespace

ValidationReport validate(const Scenario& scenario, const ValidateOptions& opts) {
  if (opts.samples < 10000) throw InvalidArgument("validation needs at least 10^4 samples");
  Battery b(opts);
  switch (scenario.model) {
    case Scenario::Model::Bivariate: bivariate_battery(b, BivariateModel(scenario.bivariate)); break;
    case Scenario::Model::Gumbel: gumbel_battery(b, GumbelModel(scenario.gumbel())); break;
    case Scenario::Model::System: system_battery(b, scenario); break;
  }
  ValidationReport r;
  r.rows = std::move(b.rows);
  r.samples = opts.samples;
  r.seed = opts.seed;
  r.pass = std::all_of(r.rows.begin(), r.rows.end(), [](const ValidationRow& x) { return x.pass; });
  return r;
}

std::string report_json(const ValidationReport& r) {
  json j;
  j["pass"] = r.pass;
  j["samples"] = r.samples;
  j["seed"] = r.seed;
  j["rows"] = json::array();
  for (const auto& row : r.rows) {
    json x = {{"name", row.name},
              {"check", row.identity ? "identity" : "monte-carlo"},
              {"closed_form", row.closed_form},
              {"pass", row.pass}};
    if (row.identity) {
      x["reference"] = row.mc_mean;
      x["deviation"] = row.z_score;
      x["tolerance"] = row.tolerance;
    } else {
      x["closed_form_error"] = row.closed_error;
      x["mc_mean"] = row.mc_mean;
      x["mc_se"] = row.mc_se;
      x["z_score"] = row.z_score;
    }
    j["rows"].push_back(x);
  }
  return j.dump(2);
}

std::string report_table(const ValidationReport& r) {
  std::string out = fmt::format("{:<26} {:>20} {:>20} {:>12} {:>9}  {}\n", "check", "closed form",
                                "mc / reference", "se / tol", "z / dev", "result");
  for (const auto& row : r.rows) {
    out += fmt::format("{:<26} {:>20.12g} {:>20.12g} {:>12.4g} {:>9.3g}  {}\n", row.name, row.closed_form,
                       row.mc_mean, row.identity ? row.tolerance : row.mc_se, row.z_score,
                       row.pass ? "pass" : "FAIL");
  }
  out += fmt::format("samples {}, seed {}: {}\n", r.samples, r.seed, r.pass ? "all checks pass" : "FAILED");
  return out;
}

// ---------------------------------------------------------------------------------------

std::string sweep_csv(std::string_view template_text, Format format,
                      const std::filesystem::path& base_dir, const std::string& param,
                      std::span<const double> grid, const QuantityRequest& q) {
  std::optional<Scenario> base;
  if (!template_text.empty()) base = parse_scenario(template_text, format, base_dir);
  const auto names = quantity_arg_names(q, base ? &*base : nullptr);
  const auto slot = std::find(names.begin(), names.end(), param);
  const bool is_arg = slot != names.end();
  if (!is_arg) {
    if (!base) throw ConfigError("parameter '" + param + "' needs a scenario template");
    set_param(template_text, format, param, 0.0);  // fails early when the key is missing
  }
  std::string out = "param,value,abs_error_estimate,status\n";
  for (double x : grid) {
    try {
      QuantityRequest row = q;
      std::optional<Scenario> edited;
      if (is_arg) {
        const auto k = static_cast<std::size_t>(slot - names.begin());
        if (row.args.size() <= k) row.args.resize(k + 1, 0.0);
        row.args[k] = x;
      } else {
        edited = parse_scenario(set_param(template_text, format, param, x), Format::Yaml, base_dir);
      }
      const auto r = evaluate(edited ? &*edited : (base ? &*base : nullptr), row);
      out += fmt::format("{},{},{},ok\n", num(x), num(r.value), num(r.abs_error));
    } catch (const Error& e) {
      out += fmt::format("{},nan,nan,{}\n", num(x), error_code_name(e.code()));
    }
  }
  return out;
}

void simulate_csv(std::ostream& out, const Scenario& scenario, std::uint64_t samples,
                  std::uint64_t seed) {
  switch (scenario.model) {
    case Scenario::Model::Bivariate: write_samples_csv(out, PairSampler(scenario.bivariate), samples, seed); break;
    case Scenario::Model::Gumbel: write_samples_csv(out, PairSampler(scenario.gumbel()), samples, seed); break;
    case Scenario::Model::System: write_samples_csv(out, SystemSampler(*scenario.system), samples, seed); break;
  }
}

std::string simulate_estimate_json(const Scenario& scenario, std::uint64_t samples,
                                   std::uint64_t seed) {
  EstimateWithCI e;
  const EstimateOptions opts{seed, 64, 0};
  if (scenario.model == Scenario::Model::System) {
    const SystemSampler s(*scenario.system);
    e = estimate([&](RngSpec r) { return ind(s.draw(r).all_equal); }, samples, opts);
  } else {
    const PairSampler s = scenario.model == Scenario::Model::Gumbel ? PairSampler(scenario.gumbel())
                                                                   : PairSampler(scenario.bivariate);
    e = estimate([&](RngSpec r) { return ind(s.draw(r).equal); }, samples, opts);
  }
  return json{{"mean", e.mean}, {"std_error", e.std_error}, {"n", e.n}, {"ci99", e.ci99_halfwidth}}.dump(2);
}

std::string erfc_report_json(std::optional<double> ell_override) {
  const auto r = erfc_bound_optimize(ell_override);
  return json{{"ell", r.ell}, {"x_star", r.x_star}, {"h_max", r.h_max}, {"feasible", r.feasible}}.dump(2);
}

}  // namespace simulstop
