#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "partialid/bounds.hpp"
#include "partialid/data.hpp"
#include "partialid/grid.hpp"
#include "partialid/lp.hpp"
#include "partialid/mediation.hpp"
#include "partialid/msm.hpp"
#include "partialid/normal.hpp"
#include "partialid/principal.hpp"
#include "partialid/uncertainty.hpp"

#ifndef PARTIALID_VERSION
#define PARTIALID_VERSION "dev"
#endif

namespace partialid::cli {

using nlohmann::ordered_json;

namespace {

struct Globals {
  std::string input;
  std::string format;
  std::string output;
  double alpha = 0.05;
  std::uint64_t seed = 7;
};

// What a subcommand produces: the JSON document plus optional text and CSV
// renderings of the same numbers.
struct Report {
  ordered_json json = ordered_json::object();
  std::string text;
  std::string csv;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cli", "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool color() { return std::getenv("PARTIALID_NO_COLOR") == nullptr; }

std::string bold(const std::string& s) { return color() ? "\033[1m" + s + "\033[0m" : s; }

std::string f3(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  std::string s = buf;
  if (s == "-0.000") s = "0.000";
  return s;
}

std::string interval_text(const Interval<double>& iv) { return "[" + f3(iv.lo) + ", " + f3(iv.hi) + "]"; }

ordered_json interval_json(const Interval<double>& iv) {
  return {{"lo", iv.lo}, {"hi", iv.hi}};
}

template <class Scalar>
ordered_json exact_json(const Interval<Scalar>& iv) {
  return {{"lo", iv.lo.str()}, {"hi", iv.hi.str()}};
}

ordered_json gamma_json(const ExtendedGamma& g) {
  if (g.is_finite()) return g.value();
  return g.str();
}

// Three or four decimal columns with a header, padded to equal widths.
std::string table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t j = 0; j < header.size(); ++j) width[j] = header[j].size();
  for (const auto& r : rows)
    for (std::size_t j = 0; j < r.size(); ++j) width[j] = std::max(width[j], r[j].size());
  auto line = [&](const std::vector<std::string>& r) {
    std::string s;
    for (std::size_t j = 0; j < r.size(); ++j) {
      s += r[j];
      if (j + 1 < r.size()) s += std::string(width[j] - r[j].size() + 2, ' ');
    }
    return s + "\n";
  };
  std::string out = bold(line(header));
  for (const auto& r : rows) out += line(r);
  return out;
}

CountData load_input(const Globals& g, std::string& digest) {
  if (g.input.empty()) throw ValidationError("cli", "--input is required");
  FileFormat fmt = FileFormat::json;
  if (!g.format.empty()) {
    fmt = parse_file_format(g.format);
  } else if (g.input.size() >= 4 && g.input.substr(g.input.size() - 4) == ".csv") {
    fmt = FileFormat::csv;
  }
  const std::string bytes = read_file(g.input);
  digest = fnv1a64(bytes);
  return fmt == FileFormat::json ? parse_counts_json(bytes) : parse_counts_csv(bytes);
}

template <class T>
const T& expect_design(const CountData& data, const char* need, const char* cmd) {
  const T* p = std::get_if<T>(&data);
  if (!p) {
    throw ValidationError("cli", std::string(cmd) + " needs a " + need + " design, got " + design_name(data));
  }
  return *p;
}

ordered_json provenance(const std::string& cmd, const std::string& digest, const Globals& g,
                        const std::vector<std::string>& assumptions, bool uses_seed) {
  ordered_json p = {{"subcommand", cmd},
                    {"version", PARTIALID_VERSION},
                    {"input_digest", "fnv1a64:" + digest},
                    {"alpha", g.alpha}};
  p["seed"] = uses_seed ? ordered_json(g.seed) : ordered_json(nullptr);
  p["assumptions"] = assumptions;
  return p;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(' '));
    item.erase(item.find_last_not_of(' ') + 1);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// ---------------------------------------------------------------- ate-bounds

struct AteOptions {
  std::string assumptions = "none";
  std::optional<double> gamma0;
  std::optional<double> gamma1;
  std::string rescale;
};

Report ate_bounds(const Globals& g, const AteOptions& o) {
  AteAssumptions a;
  std::vector<std::string> names;
  for (const auto& tok : split_list(o.assumptions)) {
    if (tok == "none") continue;
    if (tok == "mts") a.mts = true;
    else if (tok == "mtr") a.mtr = true;
    else throw ValidationError("cli", "unknown assumption '" + tok + "' (expected none, mts, mtr)");
    names.push_back(tok);
  }
  std::sort(names.begin(), names.end());
  names.erase(std::unique(names.begin(), names.end()), names.end());
  if (o.gamma0.has_value() != o.gamma1.has_value()) {
    throw ValidationError("cli", "--gamma0 and --gamma1 must be given together");
  }

  std::string digest;
  const CountData data = load_input(g, digest);

  std::optional<std::pair<double, double>> range;
  if (!o.rescale.empty()) {
    const auto parts = split_list(o.rescale);
    if (parts.size() != 2) throw ValidationError("cli", "--rescale expects lo,hi");
    try {
      range = {std::stod(parts[0]), std::stod(parts[1])};
    } catch (const std::exception&) {
      throw ValidationError("cli", "--rescale expects two numbers");
    }
    if (!std::holds_alternative<MeanSummary>(data)) {
      throw ValidationError("cli", "--rescale applies to ate_summary inputs; count data are already binary");
    }
  }

  Report r;
  double naive = 0.0;
  Interval<double> none{}, bounds{};
  std::optional<Interval<Rational>> exact;
  std::optional<AteSummary<double>> summary;

  auto single = [&](const AteSummary<double>& s) {
    summary = s;
    naive = naive_estimate(s);
    none = no_assumption_bounds(s);
    bounds = combined_bounds(s, a);
  };
  if (const auto* c = std::get_if<TwoArmCounts>(&data)) {
    single(ate_summary<double>(*c));
    exact = combined_bounds(ate_summary<Rational>(*c), a);
  } else if (const auto* c3 = std::get_if<ThreeVarCounts>(&data)) {
    single(ate_summary<double>(*c3));
    exact = combined_bounds(ate_summary<Rational>(*c3), a);
  } else if (const auto* m = std::get_if<MeanSummary>(&data)) {
    single(ate_summary(range ? rescale_means(*m, range->first, range->second) : *m));
  } else {
    const auto& sc = std::get<StratifiedCounts>(data);
    for (const auto& st : sc.strata()) {
      naive += st.weight * detail::with_stratum_label(st.label, [&] {
                 return std::visit([](const auto& c) { return naive_estimate(ate_summary<double>(c)); },
                                   st.counts);
               });
    }
    none = stratified_bounds(sc, [](const AteSummary<double>& s) { return no_assumption_bounds(s); });
    bounds = stratified_bounds(sc, [&](const AteSummary<double>& s) { return combined_bounds(s, a); });
  }

  double scale = 1.0;
  if (range) {
    scale = range->second - range->first;
    naive *= scale;
    none = rescale_effect(none, range->first, range->second);
    bounds = rescale_effect(bounds, range->first, range->second);
  }

  r.json["design"] = design_name(data);
  r.json["naive"] = naive;
  r.json["bounds"] = interval_json(bounds);
  if (exact) r.json["bounds_exact"] = exact_json(*exact);
  r.json["no_assumption"] = interval_json(none);
  r.json["excludes_zero"] = bounds.excludes_zero();

  std::ostringstream text;
  text << bold("ATE bounds") << " (" << (names.empty() ? "no assumptions" : o.assumptions) << ")\n";
  text << "  naive          " << f3(naive) << "\n";
  text << "  no assumption  " << interval_text(none) << "\n";
  text << "  bounds         " << interval_text(bounds) << "\n";

  if (o.gamma0) {
    if (!summary) throw ValidationError("cli", "--gamma0/--gamma1 need a single-population input");
    const auto scen = ConfounderScenario::make(*o.gamma0, *o.gamma1);
    const double adj = bias_adjusted_naive(naive / scale, scen) * scale;
    const auto feasible = gamma0_feasible(*summary, scen.gamma1);
    const bool ok = feasible.contains(scen.gamma0);
    r.json["bias_adjusted"] = {{"gamma0", scen.gamma0},
                               {"gamma1", scen.gamma1},
                               {"value", adj},
                               {"gamma0_feasible", interval_json(feasible)},
                               {"gamma0_compatible", ok}};
    text << "  bias adjusted  " << f3(adj) << "  (gamma0 " << f3(scen.gamma0) << ", gamma1 " << f3(scen.gamma1)
         << (ok ? "" : "; gamma0 outside the feasible range " + interval_text(feasible)) << ")\n";
  }
  if (range) r.json["rescale"] = {{"lo", range->first}, {"hi", range->second}};
  r.json["provenance"] = provenance("ate-bounds", digest, g, names, false);
  r.text = text.str();
  {
    std::ostringstream csv;
    csv << std::setprecision(17) << "quantity,lo,hi\n"
        << "naive," << naive << ',' << naive << "\n"
        << "no_assumption," << none.lo << ',' << none.hi << "\n"
        << "bounds," << bounds.lo << ',' << bounds.hi << "\n";
    r.csv = csv.str();
  }
  return r;
}

// ----------------------------------------------------------------- principal

struct PrincipalOptions {
  std::string grid = "-5:5:0.25";
  bool infinite = false;
  std::string method = "mle";
};

CurveMethod parse_method(const std::string& m) {
  if (m == "mle") return CurveMethod::mle;
  if (m == "plugin") return CurveMethod::plugin;
  throw ValidationError("cli", "unknown method '" + m + "' (expected mle or plugin)");
}

Report principal(const Globals& g, const PrincipalOptions& o) {
  auto gammas = parse_gamma_grid(o.grid);
  if (o.infinite) {
    gammas.push_back(ExtendedGamma::minus_infinity());
    gammas.push_back(ExtendedGamma::plus_infinity());
    std::sort(gammas.begin(), gammas.end());
    gammas.erase(std::unique(gammas.begin(), gammas.end()), gammas.end());
  }
  const CurveMethod method = parse_method(o.method);
  if (!(g.alpha > 0.0 && g.alpha < 1.0)) throw ValidationError("cli", "--alpha must lie in (0,1)");

  std::string digest;
  const CountData data = load_input(g, digest);
  const auto& counts = expect_design<ThreeVarCounts>(data, "three_var", "principal");

  const auto law = empirical_law<Rational>(counts);
  const auto mono = check_monotonicity(law);
  if (!mono.consistent) {
    throw InfeasibleError("principal",
                          "Pr[S=1|Z=1] = " + std::to_string(mono.ps1_1) + " exceeds Pr[S=1|Z=0] = " +
                              std::to_string(mono.ps1_0) +
                              "; the data contradict S(1) <= S(0) and bounds without it are not supported",
                          {mono.ps1_1 - mono.ps1_0}, {"Pr[S=1|Z=1] - Pr[S=1|Z=0]"});
  }
  const auto pid = PrincipalIdentified<Rational>::from_law(law);
  const auto bounds = principal_effect_bounds(pid);
  const auto curve = sensitivity_sweep(counts, gammas, method);
  const auto diag = check_normality_conditions(counts);
  const double z = norm_quantile(1.0 - g.alpha / 2.0);

  Report r;
  r.json["design"] = design_name(data);
  r.json["identified"] = {{"mu1", to_double(pid.mu1)},
                          {"mu0", to_double(pid.mu0)},
                          {"pi", to_double(pid.pi)},
                          {"ps1_z1", to_double(pid.ps1_1)},
                          {"ps1_z0", to_double(pid.ps1_0)}};
  r.json["bounds"] = interval_json(bounds.to_double());
  r.json["bounds_exact"] = exact_json(bounds);
  r.json["method"] = o.method;
  ordered_json pts = ordered_json::array();
  std::ostringstream csv;
  csv << std::setprecision(17) << "gamma,beta_hat,se,ci_lo,ci_hi\n";
  std::vector<std::vector<std::string>> rows;
  for (const auto& p : curve.points) {
    const double lo = p.beta_hat - z * p.se;
    const double hi = p.beta_hat + z * p.se;
    pts.push_back({{"gamma", gamma_json(p.gamma)},
                   {"beta_hat", p.beta_hat},
                   {"se", p.se},
                   {"ci_lo", lo},
                   {"ci_hi", hi}});
    csv << p.gamma.str() << ',' << p.beta_hat << ',' << p.se << ',' << lo << ',' << hi << "\n";
    rows.push_back({p.gamma.is_finite() ? f3(p.gamma.value()) : p.gamma.str(), f3(p.beta_hat), f3(p.se),
                    f3(lo), f3(hi)});
  }
  r.json["curve"] = pts;
  r.json["diagnostics"] = {{"ratio", diag.ratio},
                           {"gap_upper", diag.gap_upper},
                           {"gap_lower", diag.gap_lower},
                           {"lr_stat_upper", diag.stat_upper},
                           {"lr_stat_lower", diag.stat_lower},
                           {"p_value_upper", diag.pvalue_upper},
                           {"p_value_lower", diag.pvalue_lower}};
  r.json["warnings"] = curve.warnings;
  r.json["provenance"] = provenance("principal", digest, g, {"monotonicity_S"}, false);

  std::ostringstream text;
  text << bold("Principal effect among the doomed") << "\n";
  text << "  mu1 " << f3(to_double(pid.mu1)) << "  mu0 " << f3(to_double(pid.mu0)) << "  pi "
       << f3(to_double(pid.pi)) << "\n";
  text << "  bounds " << interval_text(bounds.to_double()) << "\n";
  text << "  LR p-values: upper " << std::setprecision(3) << diag.pvalue_upper << ", lower "
       << diag.pvalue_lower << "\n\n";
  text << table({"gamma", "beta_hat", "se", "ci_lo", "ci_hi"}, rows);
  for (const auto& w : curve.warnings) text << "warning: " << w << "\n";
  r.text = text.str();
  r.csv = csv.str();
  return r;
}

// ---------------------------------------------------------------------- gate

template <class Scalar>
ordered_json certificate(const LatentStateSpace& space, const typename LinearProgram<Scalar>::Vector& q) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    if (q(i) == Scalar(0)) continue;
    out.push_back({{"state", space.describe(static_cast<std::size_t>(i))},
                   {"mass", to_double(q(i))},
                   {"exact", q(i).str()}});
  }
  return out;
}

Report gate(const Globals& g, const std::string& assumption_text) {
  AssumptionSet a;
  std::vector<std::string> names;
  for (const auto& tok : split_list(assumption_text)) {
    if (tok == "er") a.exclusion_restriction = true;
    else if (tok == "mono") a.monotonicity_S = true;
    else if (tok != "none") throw ValidationError("cli", "unknown assumption '" + tok + "' (expected er, mono)");
    if (tok != "none") names.push_back(tok);
  }
  std::string digest;
  const CountData data = load_input(g, digest);
  const auto& counts = expect_design<ThreeVarCounts>(data, "three_var", "gate");
  const auto law = empirical_law<Rational>(counts);

  const auto lp = solve_bounds(build_gate_program(law, a));
  const auto space = LatentStateSpace::build(potential_outcome_components(), a);

  Report r;
  r.json["design"] = design_name(data);
  std::optional<Interval<double>> closed;
  if (a.exclusion_restriction && a.monotonicity_S) {
    const auto cf = gate_closed_form(law);
    closed = cf.to_double();
    r.json["closed_form"] = interval_json(*closed);
    r.json["closed_form_exact"] = exact_json(cf);
    r.json["agree"] = cf == lp.bounds;
  } else {
    r.json["closed_form"] = nullptr;
    r.json["agree"] = nullptr;
  }
  r.json["lp"] = interval_json(lp.bounds.to_double());
  r.json["lp_exact"] = exact_json(lp.bounds);
  std::optional<double> iv;
  try {
    iv = to_double(iv_estimand(law));
  } catch (const DomainError&) {
  }
  r.json["iv_estimand"] = iv ? ordered_json(*iv) : ordered_json(nullptr);
  r.json["excludes_zero"] = lp.bounds.excludes_zero();
  r.json["certificates"] = {{"argmin", certificate<Rational>(space, lp.argmin)},
                            {"argmax", certificate<Rational>(space, lp.argmax)}};
  r.json["provenance"] = provenance("gate", digest, g, names, false);

  std::ostringstream text;
  text << bold("GATE bounds") << " (" << (names.empty() ? "no assumptions" : assumption_text) << ")\n";
  if (closed) text << "  closed form  " << interval_text(*closed) << "\n";
  text << "  LP           " << interval_text(lp.bounds.to_double()) << "\n";
  if (closed) text << "  agreement    " << (r.json["agree"].get<bool>() ? "exact" : "NO") << "\n";
  text << "  IV estimand  " << (iv ? f3(*iv) : "undefined") << "\n";
  r.text = text.str();
  std::ostringstream csv;
  csv << std::setprecision(17) << "quantity,lo,hi\n";
  if (closed) csv << "closed_form," << closed->lo << ',' << closed->hi << "\n";
  csv << "lp," << to_double(lp.bounds.lo) << ',' << to_double(lp.bounds.hi) << "\n";
  r.csv = csv.str();
  return r;
}

// ----------------------------------------------------------------- mediation

Report mediation(const Globals& g, bool monotone) {
  std::string digest;
  const CountData data = load_input(g, digest);
  const auto& counts = expect_design<ThreeVarCounts>(data, "three_var", "mediation");
  if (!counts.outcome_defined_when_s0()) {
    throw DomainError("mediation", "mediation needs the outcome recorded for both values of S");
  }
  const auto law = empirical_law<Rational>(counts);
  const auto eff = mediation_effects(law, monotone);

  Report r;
  r.json["design"] = design_name(data);
  r.json["total"] = to_double(eff.total);
  r.json["nde0"] = interval_json(eff.nde[0].to_double());
  r.json["nde1"] = interval_json(eff.nde[1].to_double());
  r.json["nie0"] = interval_json(eff.nie[0].to_double());
  r.json["nie1"] = interval_json(eff.nie[1].to_double());
  if (eff.identified) {
    r.json["identified"] = {{"nde0", to_double(eff.identified->nde[0])},
                            {"nde1", to_double(eff.identified->nde[1])},
                            {"nie0", to_double(eff.identified->nie[0])},
                            {"nie1", to_double(eff.identified->nie[1])}};
  } else {
    r.json["identified"] = nullptr;
  }
  r.json["provenance"] =
      provenance("mediation", digest, g,
                 monotone ? std::vector<std::string>{"monotone_S01", "monotone_Y_in_z", "monotone_Y_in_s"}
                          : std::vector<std::string>{},
                 false);

  std::vector<std::vector<std::string>> rows;
  std::ostringstream csv;
  csv << std::setprecision(17) << "effect,lo,hi,identified\n";
  const char* labels[] = {"NDE0", "NDE1", "NIE0", "NIE1"};
  for (int k = 0; k < 4; ++k) {
    const auto iv = (k < 2 ? eff.nde[k] : eff.nie[k - 2]).to_double();
    std::optional<double> id;
    if (eff.identified) id = to_double(k < 2 ? eff.identified->nde[k] : eff.identified->nie[k - 2]);
    rows.push_back({labels[k], f3(iv.lo), f3(iv.hi), id ? f3(*id) : "-"});
    csv << labels[k] << ',' << iv.lo << ',' << iv.hi << ',';
    if (id) csv << *id;
    csv << "\n";
  }
  std::ostringstream text;
  text << bold("Mediation") << (monotone ? " (monotone)" : "") << "\n";
  text << "  total effect " << f3(to_double(eff.total)) << "\n\n";
  text << table({"effect", "lo", "hi", "identified"}, rows);
  r.text = text.str();
  r.csv = csv.str();
  return r;
}

// ------------------------------------------------------------------- msm-sim

struct MsmOptions {
  std::string config;
  std::string grid = "-1:1:0.1";
  std::string cohort_in;
  std::string cohort_out;
};

struct SimConfig {
  MsmSpec spec;
  std::int64_t n = 2000;
  double confounding = 0.5;
};

SimConfig parse_sim_config(const std::string& text) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("cli", std::string("malformed config: ") + e.what());
  }
  if (!root.is_object()) throw ParseError("cli", "config must be a JSON object");
  SimConfig c;
  auto num = [&](const std::string& key) {
    const auto& v = root.at(key);
    if (!v.is_number()) throw ParseError("cli", "config." + key + " must be a number");
    return v.get<double>();
  };
  std::map<std::string, double*> reals = {
      {"beta0", &c.spec.beta0},           {"beta1", &c.spec.beta1},
      {"beta2", &c.spec.beta2},           {"treat_intercept", &c.spec.treat_intercept},
      {"treat_prev", &c.spec.treat_prev}, {"x_autocorr", &c.spec.x_autocorr},
      {"u_on_x", &c.spec.u_on_x},         {"treat_on_x", &c.spec.treat_on_x},
      {"x_noise", &c.spec.x_noise},       {"u_on_y", &c.spec.u_on_y},
      {"y_noise", &c.spec.y_noise},       {"violation_gamma", &c.spec.violation_gamma},
      {"confounding_strength", &c.confounding}};
  for (auto it = root.begin(); it != root.end(); ++it) {
    const std::string& key = it.key();
    if (reals.count(key)) {
      *reals[key] = num(key);
    } else if (key == "tau" || key == "n") {
      if (!it->is_number_integer()) throw ParseError("cli", "config." + key + " must be an integer");
      if (key == "tau") c.spec.tau = it->get<int>();
      else c.n = it->get<std::int64_t>();
    } else if (key == "beta3") {
      if (it->is_number()) {
        c.spec.beta3 = {it->get<double>()};
      } else if (it->is_array() && !it->empty()) {
        c.spec.beta3.clear();
        for (const auto& v : *it) {
          if (!v.is_number()) throw ParseError("cli", "config.beta3 must hold numbers");
          c.spec.beta3.push_back(v.get<double>());
        }
      } else {
        throw ParseError("cli", "config.beta3 must be a number or a nonempty array");
      }
    } else {
      throw ParseError("cli", "unexpected key '" + key + "' in config");
    }
  }
  c.spec.validate();
  if (c.n < 1) throw ValidationError("cli", "config.n must be positive");
  return c;
}

Report msm_sim(const Globals& g, const MsmOptions& o) {
  const auto gammas = parse_finite_grid(o.grid);
  Cohort cohort;
  std::string digest;
  std::optional<SimConfig> cfg;
  if (!o.cohort_in.empty()) {
    const std::string bytes = read_file(o.cohort_in);
    digest = fnv1a64(bytes);
    std::istringstream in(bytes);
    cohort = read_cohort_csv(in);
  } else {
    if (o.config.empty()) throw ValidationError("cli", "msm-sim needs --config or --cohort");
    const std::string bytes = read_file(o.config);
    digest = fnv1a64(bytes);
    cfg = parse_sim_config(bytes);
    cohort = simulate_cohort(cfg->spec, cfg->confounding, cfg->n, g.seed);
  }
  const auto model = fit_treatment_model(cohort);
  const auto sweep = sensitivity_sweep_msm(cohort, gammas);
  const auto iptw = iptw_estimate(cohort, model);
  const auto naive = naive_estimate(cohort);

  if (!o.cohort_out.empty()) {
    std::ofstream f(o.cohort_out);
    if (!f) throw ValidationError("cli", "cannot write '" + o.cohort_out + "'");
    write_cohort_csv(f, cohort);
  }

  Report r;
  r.json["subjects"] = cohort.size();
  r.json["visits"] = cohort.front().tau() + 1;
  if (cfg) {
    r.json["truth"] = {{"beta1", cfg->spec.beta1}, {"violation_gamma", cfg->spec.violation_gamma}};
  }
  r.json["naive_eta1"] = naive.eta1;
  r.json["iptw"] = {{"eta1", iptw.eta1}, {"se", iptw.se}, {"max_weight", iptw.max_weight}};
  r.json["weights"] = {{"stabilized", true},
                       {"truncation", {model.lower, model.upper}},
                       {"truncated_probabilities", model.truncated}};
  ordered_json pts = ordered_json::array();
  std::ostringstream csv;
  csv << std::setprecision(17) << "gamma,eta1,se\n";
  std::vector<std::vector<std::string>> rows;
  for (const auto& p : sweep) {
    pts.push_back({{"gamma", p.gamma}, {"eta1", p.eta1}, {"se", p.se}});
    csv << p.gamma << ',' << p.eta1 << ',' << p.se << "\n";
    rows.push_back({f3(p.gamma), f3(p.eta1), f3(p.se)});
  }
  r.json["sweep"] = pts;
  r.json["provenance"] = provenance("msm-sim", digest, g, {"c_function:brumback_sign"}, cfg.has_value());

  std::ostringstream text;
  text << bold("MSM sensitivity sweep") << " (" << cohort.size() << " subjects)\n";
  text << "  naive eta1 " << f3(naive.eta1) << "  IPTW eta1 " << f3(iptw.eta1) << " (se " << f3(iptw.se)
       << ")\n\n";
  text << table({"gamma", "eta1", "se"}, rows);
  r.text = text.str();
  r.csv = csv.str();
  return r;
}

// --------------------------------------------------------------- uncertainty

struct UncertaintyOptions {
  std::vector<std::string> ranges;
  std::string method = "mle";
  bool band = false;
  int B = 1000;
  std::string band_grid = "-5:5:0.5";
};

ordered_json region_json(const Interval<double>& iv) {
  return {{"lo", iv.lo}, {"hi", iv.hi}, {"excludes_zero", iv.excludes_zero()}};
}

Report uncertainty(const Globals& g, const UncertaintyOptions& o) {
  std::vector<std::string> specs = o.ranges;
  if (specs.empty()) specs = {"-3:3", "-5:5", "-10:10", "-inf:inf"};
  std::vector<GammaRange> ranges;
  for (const auto& s : specs) ranges.push_back(parse_gamma_range(s));
  const CurveMethod method = parse_method(o.method);
  if (!(g.alpha > 0.0 && g.alpha < 1.0)) throw ValidationError("cli", "--alpha must lie in (0,1)");
  std::vector<ExtendedGamma> band_gammas;
  if (o.band) {
    if (o.B < 200) throw ValidationError("cli", "--B must be at least 200");
    band_gammas = parse_gamma_grid(o.band_grid);
  }

  std::string digest;
  const CountData data = load_input(g, digest);
  const auto& counts = expect_design<ThreeVarCounts>(data, "three_var", "uncertainty");

  Report r;
  r.json["design"] = design_name(data);
  r.json["method"] = o.method;
  ordered_json rows_json = ordered_json::array();
  std::vector<std::vector<std::string>> rows;
  std::ostringstream csv;
  csv << std::setprecision(17)
      << "gamma_lo,gamma_hi,ir_lo,ir_hi,pointwise_lo,pointwise_hi,strong_lo,strong_hi,c_alpha\n";
  auto mark = [](const Interval<double>& iv) { return interval_text(iv) + (iv.excludes_zero() ? "*" : " "); };
  for (const auto& range : ranges) {
    const auto u = principal_uncertainty(counts, range, g.alpha, method);
    const auto& e = u.estimates;
    rows_json.push_back({{"gamma_range", {{"lo", gamma_json(range.lo)}, {"hi", gamma_json(range.hi)}}},
                         {"ignorance", region_json(u.ignorance)},
                         {"pointwise", region_json(u.pointwise)},
                         {"strong", region_json(u.strong)},
                         {"c_alpha", u.c_alpha},
                         {"estimates",
                          {{"beta_l", e.beta_l},
                           {"beta_u", e.beta_u},
                           {"sigma_l", e.sigma_l},
                           {"sigma_u", e.sigma_u},
                           {"n", e.n}}}});
    const std::string label = (range.lo.is_finite() && range.hi.is_finite() ? "[" : "(") + range.lo.str() +
                              ", " + range.hi.str() + (range.hi.is_finite() ? "]" : ")");
    rows.push_back({label, mark(u.ignorance), mark(u.pointwise), mark(u.strong), f3(u.c_alpha)});
    csv << range.lo.str() << ',' << range.hi.str() << ',' << u.ignorance.lo << ',' << u.ignorance.hi << ','
        << u.pointwise.lo << ',' << u.pointwise.hi << ',' << u.strong.lo << ',' << u.strong.hi << ','
        << u.c_alpha << "\n";
  }
  r.json["rows"] = rows_json;

  std::ostringstream text;
  text << bold("Ignorance and uncertainty regions") << " (alpha " << g.alpha << ")\n\n";
  text << table({"Gamma", "ignorance", "pointwise", "strong", "c_alpha"}, rows);
  text << "* region excludes 0 (the test of no effect rejects)\n";

  if (o.band) {
    const CurveEstimator est = [method](const ThreeVarCounts& c, const ExtendedGamma& gm) {
      return method == CurveMethod::mle ? mle_fit(c, gm) : plugin_fit(c, gm);
    };
    const auto band = bootstrap_band(counts, est, band_gammas, o.B, g.alpha, g.seed);
    ordered_json pts = ordered_json::array();
    std::vector<std::vector<std::string>> brows;
    for (const auto& p : band.points) {
      pts.push_back(
          {{"gamma", gamma_json(p.gamma)}, {"estimate", p.estimate}, {"se", p.se}, {"lo", p.lo}, {"hi", p.hi}});
      brows.push_back({p.gamma.is_finite() ? f3(p.gamma.value()) : p.gamma.str(), f3(p.estimate), f3(p.lo),
                       f3(p.hi)});
    }
    r.json["band"] = {{"level", band.level},
                      {"critical_value", band.critical_value},
                      {"replicates", band.replicates},
                      {"redraws", band.redraws},
                      {"points", pts}};
    text << "\n" << bold("Bootstrap confidence band") << " (B " << band.replicates << ", critical value "
         << f3(band.critical_value) << ", redraws " << band.redraws << ")\n\n";
    text << table({"gamma", "estimate", "lo", "hi"}, brows);
  }
  r.json["provenance"] = provenance("uncertainty", digest, g, {"monotonicity_S"}, o.band);
  r.text = text.str();
  r.csv = csv.str();
  return r;
}

}  // namespace

std::string fnv1a64(const std::string& bytes) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bounds, sensitivity curves and uncertainty regions for partially identified causal effects",
               "partialid"};
  app.set_version_flag("--version", PARTIALID_VERSION);
  app.require_subcommand(1);

  Globals g;
  bool output_given = false;
  app.add_option("--input", g.input, "Count data file")->check(CLI::ExistingFile);
  app.add_option("--format", g.format, "Input format (default from the file extension)")
      ->check(CLI::IsMember({"json", "csv"}));
  app.add_option_function<std::string>(
         "--output",
         [&](const std::string& v) {
           g.output = v;
           output_given = true;
         },
         "Report format")
      ->check(CLI::IsMember({"json", "text", "csv"}));
  app.add_option("--alpha", g.alpha, "Level: regions have coverage 1 - alpha")->check(CLI::Range(1e-9, 1.0 - 1e-9));
  app.add_option("--seed", g.seed, "Random seed for simulation and bootstrap");

  AteOptions ate;
  auto* ate_cmd = app.add_subcommand("ate-bounds", "ATE bounds without, or with monotone, selection assumptions");
  ate_cmd->add_option("--assumptions", ate.assumptions, "none, mts, mtr or mts,mtr");
  ate_cmd->add_option("--gamma0", ate.gamma0, "Confounder effect on the outcome");
  ate_cmd->add_option("--gamma1", ate.gamma1, "Confounder imbalance between arms");
  ate_cmd->add_option("--rescale", ate.rescale, "Outcome range lo,hi for ate_summary inputs");

  PrincipalOptions pr;
  auto* pr_cmd = app.add_subcommand("principal", "Principal-stratum effect bounds and sensitivity curve");
  pr_cmd->add_option("--gamma-grid", pr.grid, "lo:hi:step, comma list, inf tokens allowed");
  pr_cmd->add_flag("--infinite-endpoints", pr.infinite, "Add gamma = -inf and inf");
  pr_cmd->add_option("--method", pr.method, "mle or plugin")->check(CLI::IsMember({"mle", "plugin"}));

  std::string gate_assumptions = "er,mono";
  auto* gate_cmd = app.add_subcommand("gate", "Global average treatment effect under noncompliance");
  gate_cmd->add_option("--assumptions", gate_assumptions, "er, mono or er,mono");

  bool monotone = false;
  auto* med_cmd = app.add_subcommand("mediation", "Natural direct and indirect effect bounds");
  med_cmd->add_flag("--monotone", monotone, "Monotone mediator and outcome");

  MsmOptions msm;
  auto* msm_cmd = app.add_subcommand("msm-sim", "Simulate a cohort and sweep the MSM sensitivity parameter");
  msm_cmd->add_option("--config", msm.config, "Simulation config (JSON)")->check(CLI::ExistingFile);
  msm_cmd->add_option("--gamma-grid", msm.grid, "lo:hi:step or comma list");
  msm_cmd->add_option("--cohort", msm.cohort_in, "Analyse this cohort CSV instead of simulating")
      ->check(CLI::ExistingFile);
  msm_cmd->add_option("--export-cohort", msm.cohort_out, "Write the analysed cohort as CSV");

  UncertaintyOptions un;
  auto* un_cmd = app.add_subcommand("uncertainty", "Ignorance, pointwise and strong uncertainty regions");
  un_cmd->add_option("--gamma-range", un.ranges, "lo:hi, repeatable (default: four standard ranges)");
  un_cmd->add_option("--method", un.method, "mle or plugin")->check(CLI::IsMember({"mle", "plugin"}));
  un_cmd->add_flag("--band", un.band, "Add a bootstrap confidence band");
  un_cmd->add_option("--B", un.B, "Bootstrap replicates");
  un_cmd->add_option("--band-grid", un.band_grid, "Gamma grid for the band");

  for (auto* sub : {ate_cmd, pr_cmd, gate_cmd, med_cmd, msm_cmd, un_cmd}) sub->fallthrough();

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "cli: " << e.what() << "\n";
    return 2;
  }

  try {
    Report rep;
    std::string cmd;
    if (*ate_cmd) {
      rep = ate_bounds(g, ate);
    } else if (*pr_cmd) {
      rep = principal(g, pr);
    } else if (*gate_cmd) {
      rep = gate(g, gate_assumptions);
    } else if (*med_cmd) {
      rep = mediation(g, monotone);
    } else if (*msm_cmd) {
      rep = msm_sim(g, msm);
      if (!output_given) g.output = "csv";
    } else {
      rep = uncertainty(g, un);
    }
    if (g.output.empty()) g.output = "json";
    if (g.output == "json") out << rep.json.dump(2) << "\n";
    else if (g.output == "text") out << rep.text;
    else out << rep.csv;
    return 0;
  } catch (const InfeasibleError& e) {
    err << e.what() << "\n";
    for (std::size_t i = 0; i < e.residuals().size(); ++i) {
      err << "  residual " << (i < e.labels().size() ? e.labels()[i] : std::to_string(i)) << " = "
          << e.residuals()[i] << "\n";
    }
    return 3;
  } catch (const ValidationError& e) {
    err << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    err << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    err << "cli: unexpected failure: " << e.what() << "\n";
    return 4;
  }
}

}  // namespace partialid::cli
