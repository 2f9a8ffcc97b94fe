// Copyright 2026 The asepdist authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Configuration ingestion, mode dispatch and result serialization for the
// command-line tool.  Rationals travel as strings ("1/3") end to end so the
// exact identity path is never laundered through floating point; floats
// appear only in numeric-path outputs.  Exit contract: 0 success/all-pass,
// 1 identity or comparison failure, 2 configuration error.

#ifndef ASEPDIST_CLI_HPP
#define ASEPDIST_CLI_HPP

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "asepdist/oracle.hpp"
#include "asepdist/quadrature.hpp"
#include "asepdist/simulator.hpp"

namespace asepdist::cli {

using json = nlohmann::ordered_json;

struct EvalSettings {
  int l = 1;
  double t = 0.0;
  long long x_min = 0;
  long long x_max = 0;
  int k_max = 0;    // absolute series cap; 0 = l + k_extra
  int k_extra = 4;  // terms beyond l when k_max is not set
  double tolerance = 1e-6;
  int quad_points = 48;
  int min_points = 24;
  double radius = 0.0;
  long long refine_budget = 50'000'000;
  int max_refine_rounds = 6;
};

struct SimSettings {
  long long trials = 10000;
  long long truncation = 0;  // "L" in configs; 0 = auto
  std::uint64_t seed = 1;
  int l_max = 1;
};

struct IdentitySettings {
  int trials = 100;
  int k_max = 4;
  int m_max = 4;
  long long n_max = 12;
  bool perturb_phi = false;
};

struct OutputSettings {
  std::string path;  // empty = stdout
  std::string format = "json";
};

struct RunConfig {
  std::string mode;
  Rational p{0}, q{1};
  bool has_model = false;
  std::optional<InitialData> initial;
  EvalSettings eval;
  SimSettings sim;
  IdentitySettings identities;
  double compare_slack = 1e-3;
  OutputSettings output;
};

namespace detail {

inline const json* find(const json& j, const std::string& key) {
  const auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

inline std::string type_name(const json& v) { return v.type_name(); }

inline ConfigError bad_field(const std::string& path, const std::string& why) {
  return ConfigError("config field '" + path + "': " + why);
}

inline long long as_int(const json& v, const std::string& path) {
  if (!v.is_number_integer())
    throw bad_field(path, "expected an integer, got " + type_name(v));
  return v.get<long long>();
}

inline double as_double(const json& v, const std::string& path) {
  if (!v.is_number())
    throw bad_field(path, "expected a number, got " + type_name(v));
  return v.get<double>();
}

inline bool as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean())
    throw bad_field(path, "expected a boolean, got " + type_name(v));
  return v.get<bool>();
}

inline std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string())
    throw bad_field(path, "expected a string, got " + type_name(v));
  return v.get<std::string>();
}

inline Rational as_rational(const json& v, const std::string& path) {
  if (v.is_number_integer()) return Rational(static_cast<long>(v.get<long long>()));
  if (!v.is_string())
    throw bad_field(path, "expected a rational string like \"1/3\"");
  try {
    return parse_rational(v.get<std::string>());
  } catch (const ConfigError& e) {
    throw bad_field(path, e.what());
  }
}

inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace detail

inline InitialData parse_initial(const json& j) {
  using detail::bad_field;
  const json* type = detail::find(j, "type");
  if (!type) throw bad_field("profile.type", "missing");
  const std::string kind = detail::as_string(*type, "profile.type");

  if (kind == "periodic" || kind == "general") {
    const json* rho = detail::find(j, "rho");
    if (!rho || !rho->is_array() || rho->empty())
      throw bad_field("profile.rho", "expected a non-empty array");
    std::vector<Rational> values;
    for (std::size_t i = 0; i < rho->size(); ++i)
      values.push_back(detail::as_rational(
          (*rho)[i], "profile.rho[" + std::to_string(i) + "]"));
    if (const json* m = detail::find(j, "m")) {
      const long long period = detail::as_int(*m, "profile.m");
      if (period != static_cast<long long>(values.size()))
        throw bad_field("profile.m", "does not match the rho list length");
    }
    try {
      if (kind == "periodic")
        return PeriodicInit{PeriodicProfile<Rational>(std::move(values))};
      return GeneralInit{GeneralProfile<Rational>(std::move(values))};
    } catch (const DomainError& e) {
      throw bad_field("profile.rho", e.what());
    }
  }
  if (kind == "deterministic") {
    const json* y = detail::find(j, "y");
    if (!y || !y->is_array() || y->empty())
      throw bad_field("profile.y", "expected a non-empty site array");
    std::vector<long long> sites;
    for (std::size_t i = 0; i < y->size(); ++i)
      sites.push_back(
          detail::as_int((*y)[i], "profile.y[" + std::to_string(i) + "]"));
    try {
      return DeterministicInit{SiteSet(std::move(sites))};
    } catch (const DomainError& e) {
      throw bad_field("profile.y", e.what());
    }
  }
  throw bad_field("profile.type",
                  "must be one of periodic|general|deterministic");
}

inline RunConfig parse_run_config(const json& j, const std::string& mode) {
  using detail::bad_field;
  RunConfig cfg;
  cfg.mode = mode;
  if (const json* m = detail::find(j, "mode")) {
    const std::string cfg_mode = detail::as_string(*m, "mode");
    if (!mode.empty() && cfg_mode != mode)
      throw bad_field("mode", "config says '" + cfg_mode +
                                  "' but the subcommand is '" + mode + "'");
    if (mode.empty()) cfg.mode = cfg_mode;
  }
  if (cfg.mode.empty()) throw bad_field("mode", "missing");

  if (const json* model = detail::find(j, "model")) {
    const json* p = detail::find(*model, "p");
    if (!p) throw bad_field("model.p", "missing");
    cfg.p = detail::as_rational(*p, "model.p");
    if (const json* q = detail::find(*model, "q")) {
      cfg.q = detail::as_rational(*q, "model.q");
    } else {
      cfg.q = 1 - cfg.p;
    }
    if (cfg.p < 0 || cfg.p > 1)
      throw bad_field("model.p", "must lie in [0,1]");
    if (cfg.p + cfg.q != 1) throw bad_field("model.q", "p + q must equal 1");
    cfg.has_model = true;
  }

  if (const json* profile = detail::find(j, "profile"))
    cfg.initial = parse_initial(*profile);

  if (const json* ev = detail::find(j, "eval")) {
    auto& e = cfg.eval;
    if (const json* v = detail::find(*ev, "l")) {
      e.l = static_cast<int>(detail::as_int(*v, "eval.l"));
      if (e.l < 1) throw bad_field("eval.l", "must be >= 1");
    }
    if (const json* v = detail::find(*ev, "t")) {
      e.t = detail::as_double(*v, "eval.t");
      if (e.t < 0) throw bad_field("eval.t", "must be >= 0");
    }
    if (const json* v = detail::find(*ev, "x_min"))
      e.x_min = detail::as_int(*v, "eval.x_min");
    if (const json* v = detail::find(*ev, "x_max"))
      e.x_max = detail::as_int(*v, "eval.x_max");
    if (e.x_max < e.x_min) throw bad_field("eval.x_max", "x range is empty");
    if (const json* v = detail::find(*ev, "k_max")) {
      e.k_max = static_cast<int>(detail::as_int(*v, "eval.k_max"));
      if (e.k_max != 0 && e.k_max < e.l)
        throw bad_field("eval.k_max", "must be 0 (auto) or >= eval.l");
    }
    if (const json* v = detail::find(*ev, "k_extra")) {
      e.k_extra = static_cast<int>(detail::as_int(*v, "eval.k_extra"));
      if (e.k_extra < 0) throw bad_field("eval.k_extra", "must be >= 0");
    }
    if (const json* v = detail::find(*ev, "tolerance")) {
      e.tolerance = detail::as_double(*v, "eval.tolerance");
      if (!(e.tolerance > 0)) throw bad_field("eval.tolerance", "must be > 0");
    }
    if (const json* v = detail::find(*ev, "quad_points")) {
      e.quad_points = static_cast<int>(detail::as_int(*v, "eval.quad_points"));
      if (e.quad_points < 8) throw bad_field("eval.quad_points", "must be >= 8");
    }
    if (const json* v = detail::find(*ev, "min_points")) {
      e.min_points = static_cast<int>(detail::as_int(*v, "eval.min_points"));
      if (e.min_points < 8) throw bad_field("eval.min_points", "must be >= 8");
    }
    if (const json* v = detail::find(*ev, "radius")) {
      e.radius = detail::as_double(*v, "eval.radius");
      if (e.radius < 0) throw bad_field("eval.radius", "must be >= 0");
    }
    if (const json* v = detail::find(*ev, "refine_budget"))
      e.refine_budget = detail::as_int(*v, "eval.refine_budget");
    if (const json* v = detail::find(*ev, "max_refine_rounds"))
      e.max_refine_rounds =
          static_cast<int>(detail::as_int(*v, "eval.max_refine_rounds"));
  }

  if (const json* sim = detail::find(j, "sim")) {
    auto& s = cfg.sim;
    if (const json* v = detail::find(*sim, "trials")) {
      s.trials = detail::as_int(*v, "sim.trials");
      if (s.trials < 1) throw bad_field("sim.trials", "must be >= 1");
    }
    if (const json* v = detail::find(*sim, "L")) {
      s.truncation = detail::as_int(*v, "sim.L");
      if (s.truncation < 0) throw bad_field("sim.L", "must be >= 0");
    }
    if (const json* v = detail::find(*sim, "seed"))
      s.seed = static_cast<std::uint64_t>(detail::as_int(*v, "sim.seed"));
    if (const json* v = detail::find(*sim, "l_max")) {
      s.l_max = static_cast<int>(detail::as_int(*v, "sim.l_max"));
      if (s.l_max < 1) throw bad_field("sim.l_max", "must be >= 1");
    }
  }

  if (const json* idn = detail::find(j, "identities")) {
    auto& i = cfg.identities;
    if (const json* v = detail::find(*idn, "trials"))
      i.trials = static_cast<int>(detail::as_int(*v, "identities.trials"));
    if (const json* v = detail::find(*idn, "k_max"))
      i.k_max = static_cast<int>(detail::as_int(*v, "identities.k_max"));
    if (const json* v = detail::find(*idn, "m_max"))
      i.m_max = static_cast<int>(detail::as_int(*v, "identities.m_max"));
    if (const json* v = detail::find(*idn, "n_max"))
      i.n_max = detail::as_int(*v, "identities.n_max");
    if (const json* v = detail::find(*idn, "perturb_phi"))
      i.perturb_phi = detail::as_bool(*v, "identities.perturb_phi");
    if (i.trials < 1) throw bad_field("identities.trials", "must be >= 1");
    if (i.k_max < 1 || i.k_max > 4)
      throw bad_field("identities.k_max", "must lie in [1,4]");
    if (i.m_max < 1) throw bad_field("identities.m_max", "must be >= 1");
    if (i.n_max < 1 || i.n_max > 14)
      throw bad_field("identities.n_max", "must lie in [1,14]");
  }

  if (const json* cmp = detail::find(j, "compare")) {
    if (const json* v = detail::find(*cmp, "abs_slack")) {
      cfg.compare_slack = detail::as_double(*v, "compare.abs_slack");
      if (cfg.compare_slack < 0)
        throw bad_field("compare.abs_slack", "must be >= 0");
    }
  }

  if (const json* out = detail::find(j, "output")) {
    if (const json* v = detail::find(*out, "path"))
      cfg.output.path = detail::as_string(*v, "output.path");
    if (const json* v = detail::find(*out, "format")) {
      cfg.output.format = detail::as_string(*v, "output.format");
      if (cfg.output.format != "json" && cfg.output.format != "csv")
        throw bad_field("output.format", "must be json or csv");
    }
  }

  // Mode-specific requirements.
  const bool needs_model = cfg.mode != "identities";
  const bool needs_profile = cfg.mode != "identities";
  if (needs_model && !cfg.has_model)
    throw bad_field("model", "required for mode '" + cfg.mode + "'");
  if (needs_profile && !cfg.initial)
    throw bad_field("profile", "required for mode '" + cfg.mode + "'");
  if (cfg.mode != "identities" && cfg.mode != "simulate") {
    // Formula path needs valid ModelParams (q != 0, tau != 1).
    try {
      ModelParams check(cfg.p, cfg.q);
      (void)check;
    } catch (const std::exception& e) {
      throw bad_field("model", e.what());
    }
  }
  if (cfg.mode != "identities" && cfg.mode != "cdf" && cfg.mode != "pmf" &&
      cfg.mode != "simulate" && cfg.mode != "compare")
    throw bad_field("mode", "unknown mode '" + cfg.mode + "'");
  return cfg;
}

// Canonical re-serialization; parse(to_json(parse(x))) == parse(x).
inline json config_to_json(const RunConfig& cfg) {
  json j;
  j["mode"] = cfg.mode;
  if (cfg.has_model) {
    j["model"]["p"] = rational_str(cfg.p);
    j["model"]["q"] = rational_str(cfg.q);
  }
  if (cfg.initial) {
    json p;
    if (const auto* per = std::get_if<PeriodicInit>(&*cfg.initial)) {
      p["type"] = "periodic";
      p["m"] = per->profile.period();
      json rho = json::array();
      for (int r = 0; r < per->profile.period(); ++r)
        rho.push_back(rational_str(per->profile.at_residue(r)));
      p["rho"] = rho;
    } else if (const auto* gen = std::get_if<GeneralInit>(&*cfg.initial)) {
      p["type"] = "general";
      json rho = json::array();
      for (const auto& v : gen->profile.values())
        rho.push_back(rational_str(v));
      p["rho"] = rho;
    } else {
      p["type"] = "deterministic";
      p["y"] = std::get<DeterministicInit>(*cfg.initial).y.sites();
    }
    j["profile"] = p;
  }
  j["eval"] = {{"l", cfg.eval.l},
               {"t", cfg.eval.t},
               {"x_min", cfg.eval.x_min},
               {"x_max", cfg.eval.x_max},
               {"k_max", cfg.eval.k_max},
               {"k_extra", cfg.eval.k_extra},
               {"tolerance", cfg.eval.tolerance},
               {"quad_points", cfg.eval.quad_points},
               {"min_points", cfg.eval.min_points},
               {"radius", cfg.eval.radius},
               {"refine_budget", cfg.eval.refine_budget},
               {"max_refine_rounds", cfg.eval.max_refine_rounds}};
  j["sim"] = {{"trials", cfg.sim.trials},
              {"L", cfg.sim.truncation},
              {"seed", cfg.sim.seed},
              {"l_max", cfg.sim.l_max}};
  j["identities"] = {{"trials", cfg.identities.trials},
                     {"k_max", cfg.identities.k_max},
                     {"m_max", cfg.identities.m_max},
                     {"n_max", cfg.identities.n_max},
                     {"perturb_phi", cfg.identities.perturb_phi}};
  j["compare"] = {{"abs_slack", cfg.compare_slack}};
  j["output"] = {{"path", cfg.output.path}, {"format", cfg.output.format}};
  return j;
}

struct CliOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> kmax;
  std::optional<long long> trials;
  std::optional<std::string> out;
  std::optional<std::string> format;
};

inline void apply_overrides(RunConfig& cfg, const CliOverrides& ov) {
  if (ov.seed) cfg.sim.seed = *ov.seed;
  if (ov.kmax) {
    if (*ov.kmax != 0 && *ov.kmax < cfg.eval.l)
      throw ConfigError("config field 'eval.k_max': must be 0 (auto) or >= eval.l");
    cfg.eval.k_max = *ov.kmax;
  }
  if (ov.trials) {
    if (*ov.trials < 1)
      throw ConfigError("config field 'sim.trials': must be >= 1");
    cfg.sim.trials = *ov.trials;
    cfg.identities.trials = static_cast<int>(
        std::min<long long>(*ov.trials, 1'000'000));
  }
  if (ov.out) cfg.output.path = *ov.out;
  if (ov.format) {
    if (*ov.format != "json" && *ov.format != "csv")
      throw ConfigError("config field 'output.format': must be json or csv");
    cfg.output.format = *ov.format;
  }
}

namespace detail {

class OutputSink {
 public:
  explicit OutputSink(const std::string& path) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw ConfigError("cannot open output path '" + path + "'");
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

inline json result_to_json(const CdfResult& r, int l) {
  json terms = json::array();
  for (const auto& t : r.terms)
    terms.push_back({{"k", t.k},
                     {"re", t.value.real()},
                     {"im", t.value.imag()},
                     {"quad_error", t.quad_error},
                     {"points", t.points}});
  return {{"l", l},
          {"x", r.x},
          {"value", r.value},
          {"imag_residual", r.imag_residual},
          {"tail_estimate", r.tail_estimate},
          {"series_converged", r.series_converged},
          {"quadrature_converged", r.quadrature_converged},
          {"terms", terms}};
}

inline std::string csv_bool(bool b) { return b ? "true" : "false"; }

inline json identity_to_json(const IdentityReport& r) {
  return {{"identity", r.identity},
          {"k", r.instance.k},
          {"m", r.instance.m},
          {"N", r.instance.n},
          {"tau", r.instance.tau},
          {"rho", r.instance.rho},
          {"xi", r.instance.xi},
          {"left", r.left},
          {"right", r.right},
          {"equal", r.equal}};
}

inline std::string join(const std::vector<std::string>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += v[i];
  }
  return out;
}

}  // namespace detail

inline EvalRequest make_eval_request(const RunConfig& cfg, int l) {
  EvalRequest req{.l = l,
                  .x = cfg.eval.x_min,
                  .t = cfg.eval.t,
                  .initial = *cfg.initial,
                  .params = ModelParams(cfg.p, cfg.q),
                  .k_max = cfg.eval.k_max > 0 ? cfg.eval.k_max
                                              : l + cfg.eval.k_extra,
                  .tolerance = cfg.eval.tolerance,
                  .quad_points = cfg.eval.quad_points,
                  .min_points = cfg.eval.min_points,
                  .radius = cfg.eval.radius,
                  .refine_budget = cfg.eval.refine_budget,
                  .max_refine_rounds = cfg.eval.max_refine_rounds};
  return req;
}

inline SimConfig make_sim_config(const RunConfig& cfg) {
  SimConfig sim;
  sim.p = cfg.p.get_d();
  sim.t = cfg.eval.t;
  sim.initial = *cfg.initial;
  sim.truncation = cfg.sim.truncation;
  sim.trials = cfg.sim.trials;
  sim.seed = cfg.sim.seed;
  sim.l_max = cfg.sim.l_max;
  sim.x_min = cfg.eval.x_min;
  sim.x_max = cfg.eval.x_max;
  return sim;
}

inline int run_identities(const RunConfig& cfg) {
  SuiteOptions opts;
  opts.seed = cfg.sim.seed;
  opts.trials = cfg.identities.trials;
  opts.k_max = cfg.identities.k_max;
  opts.m_max = cfg.identities.m_max;
  opts.n_max = cfg.identities.n_max;
  opts.perturb_phi = cfg.identities.perturb_phi;
  const auto reports = run_identity_suite(opts);

  detail::OutputSink sink(cfg.output.path);
  auto& os = sink.stream();
  bool all_equal = true;
  if (cfg.output.format == "csv") {
    os << "identity,equal,k,m,N,tau,rho,xi,left,right\n";
    for (const auto& r : reports) {
      os << r.identity << ',' << detail::csv_bool(r.equal) << ','
         << r.instance.k << ',' << r.instance.m << ',' << r.instance.n << ','
         << r.instance.tau << ',' << detail::join(r.instance.rho, '|') << ','
         << detail::join(r.instance.xi, '|') << ',' << r.left << ',' << r.right
         << '\n';
      all_equal = all_equal && r.equal;
    }
  } else {
    for (const auto& r : reports) {
      os << detail::identity_to_json(r).dump() << '\n';
      all_equal = all_equal && r.equal;
    }
  }
  std::cerr << "identities: " << reports.size() << " checks, "
            << (all_equal ? "all equal" : "FAILURES PRESENT") << "\n";
  return all_equal ? 0 : 1;
}

inline int run_distribution(const RunConfig& cfg, bool pmf) {
  const auto req = make_eval_request(cfg, cfg.eval.l);
  std::vector<CdfResult> rows;
  if (pmf) {
    const auto grid =
        evaluate_cdf_grid(req, cfg.eval.x_min - 1, cfg.eval.x_max);
    for (std::size_t i = 1; i < grid.size(); ++i) {
      CdfResult r = grid[i];
      r.value = grid[i].value - grid[i - 1].value;
      r.imag_residual = std::max(grid[i].imag_residual, grid[i - 1].imag_residual);
      r.tail_estimate = std::max(grid[i].tail_estimate, grid[i - 1].tail_estimate);
      r.series_converged = grid[i].series_converged && grid[i - 1].series_converged;
      r.quadrature_converged =
          grid[i].quadrature_converged && grid[i - 1].quadrature_converged;
      r.terms.clear();
      rows.push_back(std::move(r));
    }
  } else {
    rows = evaluate_cdf_grid(req, cfg.eval.x_min, cfg.eval.x_max);
  }

  detail::OutputSink sink(cfg.output.path);
  auto& os = sink.stream();
  if (cfg.output.format == "csv") {
    os << "l,x,value,imag_residual,tail_estimate,series_converged,"
          "quadrature_converged\n";
    for (const auto& r : rows)
      os << cfg.eval.l << ',' << r.x << ',' << detail::fmt_double(r.value)
         << ',' << detail::fmt_double(r.imag_residual) << ','
         << detail::fmt_double(r.tail_estimate) << ','
         << detail::csv_bool(r.series_converged) << ','
         << detail::csv_bool(r.quadrature_converged) << '\n';
  } else {
    json out;
    out["mode"] = pmf ? "pmf" : "cdf";
    out["model"] = {{"p", rational_str(cfg.p)}, {"q", rational_str(cfg.q)}};
    json results = json::array();
    for (const auto& r : rows)
      results.push_back(detail::result_to_json(r, cfg.eval.l));
    out["results"] = results;
    os << out.dump(2) << '\n';
  }
  return 0;
}

inline int run_simulate(const RunConfig& cfg) {
  const auto sim = make_sim_config(cfg);
  const auto emp = estimate_cdf(sim);

  detail::OutputSink sink(cfg.output.path);
  auto& os = sink.stream();
  if (cfg.output.format == "csv") {
    os << "l,x,hits,trials,p_hat,stderr\n";
    for (int l = 1; l <= sim.l_max; ++l)
      for (long long x = emp.x_min; x <= emp.x_max; ++x)
        os << l << ',' << x << ',' << emp.hits[l - 1][x - emp.x_min] << ','
           << emp.trials << ',' << detail::fmt_double(emp.p_hat(l, x)) << ','
           << detail::fmt_double(emp.stderr_at(l, x)) << '\n';
  } else {
    json out;
    out["mode"] = "simulate";
    json results = json::array();
    for (int l = 1; l <= sim.l_max; ++l)
      for (long long x = emp.x_min; x <= emp.x_max; ++x)
        results.push_back({{"l", l},
                           {"x", x},
                           {"hits", emp.hits[l - 1][x - emp.x_min]},
                           {"trials", emp.trials},
                           {"p_hat", emp.p_hat(l, x)},
                           {"stderr", emp.stderr_at(l, x)}});
    out["results"] = results;
    os << out.dump(2) << '\n';
  }
  return 0;
}

inline int run_compare(const RunConfig& cfg) {
  const auto sim = make_sim_config(cfg);
  const auto emp = estimate_cdf(sim);

  struct Row {
    int l;
    CdfResult formula;
    double p_hat, se, discrepancy;
    bool pass;
  };
  std::vector<Row> rows;
  bool all_pass = true;
  double max_disc = 0.0;
  for (int l = 1; l <= cfg.sim.l_max; ++l) {
    RunConfig per_l = cfg;
    per_l.eval.k_max = 0;  // compare always uses l + k_extra
    const auto req = make_eval_request(per_l, l);
    const auto grid = evaluate_cdf_grid(req, cfg.eval.x_min, cfg.eval.x_max);
    for (const auto& r : grid) {
      Row row;
      row.l = l;
      row.formula = r;
      row.p_hat = emp.p_hat(l, r.x);
      row.se = emp.stderr_at(l, r.x);
      row.discrepancy = r.value - row.p_hat;
      row.pass = std::abs(row.discrepancy) <= 3.0 * row.se + cfg.compare_slack;
      all_pass = all_pass && row.pass;
      max_disc = std::max(max_disc, std::abs(row.discrepancy));
      rows.push_back(std::move(row));
    }
  }

  detail::OutputSink sink(cfg.output.path);
  auto& os = sink.stream();
  if (cfg.output.format == "csv") {
    os << "l,x,formula,series_converged,quadrature_converged,p_hat,stderr,"
          "discrepancy,pass\n";
    for (const auto& r : rows)
      os << r.l << ',' << r.formula.x << ','
         << detail::fmt_double(r.formula.value) << ','
         << detail::csv_bool(r.formula.series_converged) << ','
         << detail::csv_bool(r.formula.quadrature_converged) << ','
         << detail::fmt_double(r.p_hat) << ',' << detail::fmt_double(r.se)
         << ',' << detail::fmt_double(r.discrepancy) << ','
         << detail::csv_bool(r.pass) << '\n';
  } else {
    json out;
    out["mode"] = "compare";
    json results = json::array();
    for (const auto& r : rows)
      results.push_back({{"l", r.l},
                         {"x", r.formula.x},
                         {"formula", r.formula.value},
                         {"series_converged", r.formula.series_converged},
                         {"quadrature_converged", r.formula.quadrature_converged},
                         {"p_hat", r.p_hat},
                         {"stderr", r.se},
                         {"discrepancy", r.discrepancy},
                         {"pass", r.pass}});
    out["results"] = results;
    out["summary"] = {{"all_pass", all_pass}, {"max_discrepancy", max_disc}};
    os << out.dump(2) << '\n';
  }
  std::cerr << "compare: " << rows.size() << " points, "
            << (all_pass ? "all pass" : "FAILURES PRESENT")
            << ", max discrepancy " << max_disc << "\n";
  return all_pass ? 0 : 1;
}

inline int run(const RunConfig& cfg) {
  if (cfg.mode == "identities") return run_identities(cfg);
  if (cfg.mode == "cdf") return run_distribution(cfg, false);
  if (cfg.mode == "pmf") return run_distribution(cfg, true);
  if (cfg.mode == "simulate") return run_simulate(cfg);
  if (cfg.mode == "compare") return run_compare(cfg);
  throw ConfigError("config field 'mode': unknown mode '" + cfg.mode + "'");
}

}  // namespace asepdist::cli

#endif  // ASEPDIST_CLI_HPP
