#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ssrk/analysis.hpp"
#include "ssrk/errors.hpp"
#include "ssrk/io.hpp"
#include "ssrk/noise.hpp"
#include "ssrk/sde.hpp"
#include "ssrk/tableau.hpp"
#include "ssrk/tableau_json.hpp"
#include "ssrk/version.hpp"

namespace ssrk::cli {

namespace fs = std::filesystem;
using nlohmann::json;

enum ExitCode : int { kOk = 0, kTargetUnmet = 1, kUsage = 2, kRuntime = 3 };

/// Malformed or inconsistent configuration; mapped to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Scheme specifiers

/// "name" or "name:p1,p2" -> builtin tableau.
inline Tableau parse_builtin_spec(std::string_view text) {
  const auto colon = text.find(':');
  const std::string name(text.substr(0, colon));
  std::vector<double> params;
  if (colon != std::string_view::npos) {
    std::stringstream ss{std::string(text.substr(colon + 1))};
    std::string item;
    while (std::getline(ss, item, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(item, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      while (used < item.size() && std::isspace(static_cast<unsigned char>(item[used]))) ++used;
      if (used == 0 || used != item.size())
        throw ConfigError("scheme '" + std::string(text) + "': bad parameter '" + item + "'");
      params.push_back(v);
    }
  }
  return make_builtin(name, params);
}

/// A tableau JSON path (if it names an existing file or ends in .json) or a builtin spec.
inline Tableau resolve_scheme_text(const std::string& text, const fs::path& base = {}) {
  const fs::path p = fs::path(text).is_absolute() || base.empty() ? fs::path(text) : base / text;
  if (fs::exists(p) || fs::path(text).extension() == ".json") return load_tableau(p.string());
  return parse_builtin_spec(text);
}

/// String specifier, {"builtin": name, "params": [...]} or {"file": path}.
inline Tableau resolve_scheme(const json& spec, const fs::path& base = {}) {
  if (spec.is_string()) return resolve_scheme_text(spec.get<std::string>(), base);
  if (spec.is_object()) {
    if (spec.contains("file")) {
      const fs::path f = spec.at("file").get<std::string>();
      return load_tableau((f.is_absolute() || base.empty() ? f : base / f).string());
    }
    if (spec.contains("builtin")) {
      std::vector<double> params;
      if (spec.contains("params")) params = spec.at("params").get<std::vector<double>>();
      return make_builtin(spec.at("builtin").get<std::string>(), params);
    }
  }
  throw ConfigError("scheme specifier must be a string, {\"builtin\", \"params\"} or {\"file\"}");
}

// ---------------------------------------------------------------------------
// Experiment configuration

enum class Experiment { convergence, growth, tableau_check, drift_constants };

inline Experiment parse_experiment(const std::string& s) {
  if (s == "convergence") return Experiment::convergence;
  if (s == "growth") return Experiment::growth;
  if (s == "tableau_check") return Experiment::tableau_check;
  if (s == "drift_constants") return Experiment::drift_constants;
  throw ConfigError("unknown experiment '" + s +
                    "' (expected convergence, growth, tableau_check or drift_constants)");
}

struct SystemConfig {
  std::string name = "harmonic_oscillator";  // or "double_well"
  std::vector<double> sigma = {1.0};
  double p0 = 1.0;
  double q0 = 0.0;

  PlanarSystem build() const {
    if (name == "harmonic_oscillator") return harmonic_oscillator(sigma.at(0), p0, q0);
    return double_well(sigma.at(0), sigma.at(1), p0, q0);
  }
};

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> paths;
  std::optional<std::string> out;
  std::optional<std::string> format;
  std::optional<std::size_t> threads;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::convergence;
  SystemConfig system;
  std::vector<Tableau> schemes;
  std::vector<double> h_list;
  double h = 0.1;
  double T = 1.0;
  std::size_t n_paths = 1000;
  std::uint64_t seed = 1;
  double reference_h = 0x1.0p-12;
  std::size_t record_stride = 0;
  std::size_t threads = 0;
  SolverConfig solver;
  OrderTarget target = OrderTarget::ms_1_5;
  double tol = kDefaultConditionTol;
  std::vector<double> alpha1 = {0.3, 0.5, 0.7};
  std::vector<double> b1;
  bool midpoint = true;
  std::size_t oracle_steps = 1000;
  std::string out_path;  // empty: standard output
  std::string format = "csv";
  json raw;  // effective config, embedded in outputs
};

namespace detail {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  return j.contains(key) ? j.at(key).get<T>() : fallback;
}

inline std::vector<double> h_values(const json& j) {
  if (j.contains("h_list")) return j.at("h_list").get<std::vector<double>>();
  if (j.contains("h_grid")) {
    const auto& g = j.at("h_grid");
    const double a = g.at("start").get<double>();
    const double b = g.at("stop").get<double>();
    const auto n = g.at("count").get<std::size_t>();
    if (n < 2) throw ConfigError("h_grid.count must be at least 2");
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i)
      out[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1);
    return out;
  }
  return {};
}

inline std::string format_from_path(const std::string& path) {
  const auto ext = fs::path(path).extension().string();
  return ext == ".json" ? "json" : "csv";
}

}  // namespace detail

/**
 * Fully validates a config document (schemes are resolved, relative file paths taken
 * from base_dir) so that no simulation starts on a bad config.
 */
inline ExperimentConfig parse_config(json doc, const fs::path& base_dir,
                                     const RunOverrides& ov = {}) {
  ExperimentConfig cfg;
  try {
    if (!doc.is_object()) throw ConfigError("config must be a JSON object");
    if (ov.seed) doc["seed"] = *ov.seed;
    if (ov.paths) doc["n_paths"] = *ov.paths;
    if (ov.threads) doc["threads"] = *ov.threads;
    if (ov.out || ov.format) {
      json& o = doc["output"];
      if (!o.is_object()) o = json::object();
      if (ov.out) o["path"] = *ov.out;
      if (ov.format) o["format"] = *ov.format;
    }

    cfg.experiment = parse_experiment(doc.at("experiment").get<std::string>());
    if (doc.contains("system")) {
      const auto& s = doc.at("system");
      cfg.system.name = detail::get_or<std::string>(s, "name", "harmonic_oscillator");
      if (cfg.system.name == "harmonic_oscillator") {
        cfg.system.sigma = {detail::get_or(s, "sigma", 1.0)};
      } else if (cfg.system.name == "double_well") {
        cfg.system.sigma = {detail::get_or(s, "sigma1", 1.0), detail::get_or(s, "sigma2", 1.0)};
      } else {
        throw ConfigError("unknown system '" + cfg.system.name +
                          "' (expected harmonic_oscillator or double_well)");
      }
      cfg.system.p0 = detail::get_or(s, "p0", 1.0);
      cfg.system.q0 = detail::get_or(s, "q0", 0.0);
    }
    if (doc.contains("schemes")) {
      if (!doc.at("schemes").is_array()) throw ConfigError("schemes must be an array");
      for (const auto& s : doc.at("schemes")) cfg.schemes.push_back(resolve_scheme(s, base_dir));
    }
    cfg.h_list = detail::h_values(doc);
    cfg.h = detail::get_or(doc, "h", cfg.h);
    cfg.T = detail::get_or(doc, "T", cfg.T);
    cfg.n_paths = detail::get_or(doc, "n_paths", cfg.n_paths);
    cfg.seed = detail::get_or(doc, "seed", cfg.seed);
    cfg.reference_h = detail::get_or(doc, "reference_h", cfg.reference_h);
    cfg.record_stride = detail::get_or(doc, "record_stride", cfg.record_stride);
    cfg.threads = detail::get_or(doc, "threads", cfg.threads);
    if (doc.contains("solver")) {
      const auto& s = doc.at("solver");
      const auto mode = detail::get_or<std::string>(s, "mode", "fixed_point");
      if (mode == "fixed_point")
        cfg.solver.mode = SolverMode::fixed_point;
      else if (mode == "explicit")
        cfg.solver.mode = SolverMode::explicit_only;
      else
        throw ConfigError("solver.mode must be fixed_point or explicit");
      cfg.solver.tol = detail::get_or(s, "tol", cfg.solver.tol);
      cfg.solver.max_iters = detail::get_or(s, "max_iters", cfg.solver.max_iters);
      cfg.solver.validate();
    }
    if (doc.contains("target"))
      cfg.target = parse_order_target(doc.at("target").get<std::string>());
    cfg.tol = detail::get_or(doc, "tol", cfg.tol);
    cfg.alpha1 = detail::get_or(doc, "alpha1", cfg.alpha1);
    cfg.b1 = detail::get_or(doc, "b1", cfg.b1);
    cfg.midpoint = detail::get_or(doc, "midpoint", cfg.midpoint);
    cfg.oracle_steps = detail::get_or(doc, "oracle_steps", cfg.oracle_steps);
    if (doc.contains("output")) {
      const auto& o = doc.at("output");
      cfg.out_path = detail::get_or<std::string>(o, "path", "");
      cfg.format = o.contains("format") ? o.at("format").get<std::string>()
                                        : detail::format_from_path(cfg.out_path);
    }
    if (cfg.format != "csv" && cfg.format != "json")
      throw ConfigError("output format must be csv or json, got '" + cfg.format + "'");
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const StructuralError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const DomainError& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }

  auto need = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError("config: " + msg);
  };
  switch (cfg.experiment) {
    case Experiment::convergence:
      need(!cfg.schemes.empty(), "convergence needs at least one scheme");
      need(cfg.h_list.size() >= 2, "convergence needs at least two step sizes in h_list");
      need(cfg.T > 0.0, "T must be positive");
      need(cfg.n_paths >= 2, "n_paths must be at least 2");
      need(dyadic_exponent(cfg.T, cfg.reference_h) >= 0, "reference_h must be T / 2^k");
      for (double h : cfg.h_list) {
        const int k = dyadic_exponent(cfg.T, h);
        need(k >= 0, "step " + format_number(h) + " is not T / 2^k");
        need(k < dyadic_exponent(cfg.T, cfg.reference_h),
             "step " + format_number(h) + " is not coarser than reference_h");
      }
      break;
    case Experiment::growth:
      need(!cfg.schemes.empty(), "growth needs at least one scheme");
      need(cfg.n_paths >= 2, "n_paths must be at least 2");
      need(cfg.h > 0.0 && cfg.T > 0.0, "h and T must be positive");
      need(std::abs(cfg.T / cfg.h - std::round(cfg.T / cfg.h)) <= 1e-9 * (cfg.T / cfg.h),
           "T / h must be an integer");
      break;
    case Experiment::tableau_check:
      need(!cfg.schemes.empty(), "tableau_check needs at least one scheme");
      need(cfg.tol > 0.0, "tol must be positive");
      break;
    case Experiment::drift_constants:
      need(!cfg.h_list.empty(), "drift_constants needs h_list or h_grid");
      for (double h : cfg.h_list) need(h > 0.0, "drift_constants step sizes must be positive");
      for (double a : cfg.alpha1) need(a > 0.0 && a < 1.0, "alpha1 values must lie in (0,1)");
      for (double b : cfg.b1) need(std::abs(b) < std::sqrt(2.0 / 3.0), "|b1| must be < sqrt(2/3)");
      need(cfg.oracle_steps >= 2, "oracle_steps must be at least 2");
      break;
  }
  cfg.raw = std::move(doc);
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path, const RunOverrides& ov = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_config(std::move(doc), fs::path(path).parent_path(), ov);
}

// ---------------------------------------------------------------------------
// Experiments

namespace detail {

inline std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::setprecision(digits) << v;
  return s.str();
}

template <class R, class CsvFn>
void emit(const ExperimentConfig& cfg, std::span<const R> results, CsvFn&& write_csv,
          std::ostream& out) {
  const json meta = make_metadata(cfg.raw);
  std::ofstream file;
  std::ostream* dst = &out;
  if (!cfg.out_path.empty()) {
    file.open(cfg.out_path, std::ios::binary);
    if (!file) throw Error("cannot open output '" + cfg.out_path + "'");
    dst = &file;
  }
  if (cfg.format == "json")
    *dst << results_document(results, meta).dump(2) << '\n';
  else
    write_csv(*dst, results, meta);
  if (!*dst) throw Error("write to output failed");
}

}  // namespace detail

/// Runs the experiment; data go to the configured output (stdout if none), human summary to
/// `log`. Returns the exit code.
inline int run_experiment(const ExperimentConfig& cfg, std::ostream& out, std::ostream& log) {
  switch (cfg.experiment) {
    case Experiment::convergence: {
      const auto sys = cfg.system.build();
      ConvergenceOptions opts;
      opts.reference_h = cfg.reference_h;
      opts.threads = cfg.threads;
      opts.solver = cfg.solver;
      const auto results = ms_convergence(sys.sde, sys.y0, std::span<const Tableau>(cfg.schemes),
                                          cfg.h_list, cfg.T, cfg.n_paths, cfg.seed, opts);
      detail::emit(cfg, std::span<const ConvergenceResult>(results), write_convergence_csv, out);
      for (const auto& r : results)
        log << r.scheme << ": fitted order " << detail::fixed(r.fitted_order) << " +- "
            << detail::fixed(r.order_stderr, 2) << ", rms error at h = "
            << format_number(r.step_sizes.back()) << ": " << detail::fixed(r.rms_errors.back())
            << " (" << r.n_paths << " paths, " << r.failed_paths << " failed)\n";
      return kOk;
    }
    case Experiment::growth: {
      const auto sys = cfg.system.build();
      GrowthOptions opts;
      opts.record_stride = cfg.record_stride;
      opts.threads = cfg.threads;
      opts.solver = cfg.solver;
      std::vector<GrowthResult> results;
      for (const auto& tab : cfg.schemes)
        results.push_back(
            energy_growth(sys.sde, sys.y0, sys.energy, tab, cfg.h, cfg.T, cfg.n_paths, cfg.seed, opts));
      detail::emit(cfg, std::span<const GrowthResult>(results), write_growth_csv, out);
      for (std::size_t i = 0; i < results.size(); ++i) {
        const auto& r = results[i];
        log << r.scheme << ": fitted slope " << detail::fixed(r.fitted_slope, 6) << " +- "
            << detail::fixed(r.slope_stderr, 2) << " (exact solution " << r.expected_slope;
        if (cfg.system.name == "harmonic_oscillator") {
          try {
            log << ", second-moment oracle "
                << detail::fixed(moment_slope_oracle(cfg.schemes[i], cfg.system.sigma[0], cfg.h), 6);
          } catch (const Error&) {
          }
        }
        log << ")\n";
      }
      return kOk;
    }
    case Experiment::tableau_check: {
      std::vector<SchemeCheck> checks;
      bool all = true;
      for (const auto& tab : cfg.schemes) {
        checks.push_back(check_scheme(tab, cfg.target, cfg.tol));
        all = all && checks.back().target_met;
      }
      detail::emit(cfg, std::span<const SchemeCheck>(checks), write_check_csv, out);
      for (const auto& c : checks)
        log << c.scheme << ": " << to_string(c.order.verdict) << ", "
            << to_string(c.symplectic.verdict) << (c.target_met ? "" : " (target not met)") << '\n';
      return all ? kOk : kTargetUnmet;
    }
    case Experiment::drift_constants: {
      std::vector<DriftPoint> pts;
      MomentOracleOptions mo;
      mo.n_steps = cfg.oracle_steps;
      auto oracle = [&](const Tableau& t, double h) { return moment_slope_oracle(t, 1.0, h, mo) - 0.5; };
      std::vector<std::vector<double>> alpha_abs(cfg.alpha1.size());
      for (std::size_t k = 0; k < cfg.alpha1.size(); ++k) {
        const double a = cfg.alpha1[k];
        const auto tab = make_builtin(Builtin::ssrk_alpha1, {a});
        for (double h : cfg.h_list) {
          const double c = drift_constant(DriftConstantKind::c_alpha1, h, {a});
          pts.push_back({tab.name(), "closed_form", h, c});
          pts.push_back({tab.name(), "moment_oracle", h, oracle(tab, h)});
          alpha_abs[k].push_back(std::abs(c));
        }
      }
      std::vector<double> mid_abs;
      if (cfg.midpoint) {
        const auto tab = make_builtin(Builtin::midpoint);
        for (double h : cfg.h_list) {
          const double c = oracle(tab, h);
          pts.push_back({tab.name(), "moment_oracle", h, c});
          mid_abs.push_back(std::abs(c));
        }
      }
      for (double b : cfg.b1) {
        const auto tab = make_builtin(Builtin::ssrk_alpha1_b1, {0.5, b});
        for (double h : cfg.h_list) {
          pts.push_back({tab.name(), "closed_form", h,
                         drift_constant(DriftConstantKind::c_b1_at_alpha_half, h, {b})});
          pts.push_back({tab.name(), "moment_oracle", h, oracle(tab, h)});
        }
      }
      detail::emit(cfg, std::span<const DriftPoint>(pts), write_drift_csv, out);
      const auto half = std::find(cfg.alpha1.begin(), cfg.alpha1.end(), 0.5);
      if (half != cfg.alpha1.end()) {
        const auto k = static_cast<std::size_t>(half - cfg.alpha1.begin());
        bool smallest = true;
        for (std::size_t i = 0; i < cfg.h_list.size(); ++i) {
          for (std::size_t j = 0; j < cfg.alpha1.size(); ++j)
            smallest = smallest && alpha_abs[k][i] <= alpha_abs[j][i];
          if (!mid_abs.empty()) smallest = smallest && alpha_abs[k][i] <= mid_abs[i];
        }
        log << "alpha1 = 0.5 has the smallest |C(h)| at every h: " << (smallest ? "yes" : "no")
            << '\n';
      }
      log << pts.size() << " points\n";
      return kOk;
    }
  }
  return kRuntime;
}

// ---------------------------------------------------------------------------
// Subcommands

inline std::string scheme_summary(const BuiltinInfo& info) {
  const auto t = make_builtin(info.id, info.sample);
  const auto r15 = check_order_conditions(t, OrderTarget::ms_1_5);
  std::string order;
  if (r15.verdict == Verdict::order_1_5) {
    order = "ms order 1.5";
    if (check_order_conditions(t, OrderTarget::ms_2_0_second_order).verdict ==
        Verdict::order_2_0_second_order_systems)
      order += " (2.0 second-order)";
  } else if (r15.verdict == Verdict::order_1_0) {
    order = "ms order 1.0";
  } else {
    order = "below ms order 1.0";
  }
  const bool symp = check_symplectic(t).verdict == Verdict::symplectic;
  std::string line;
  if (!info.params.empty()) line = "params: " + std::string(info.domain) + "; ";
  return line + order + "; symplectic: " + (symp ? "yes" : "no");
}

inline int cmd_list_schemes(std::ostream& out) {
  std::size_t width = 0;
  for (const auto& info : builtin_catalog()) width = std::max(width, info.name.size());
  for (const auto& info : builtin_catalog())
    out << std::left << std::setw(static_cast<int>(width + 2)) << info.name << scheme_summary(info)
        << '\n';
  return kOk;
}

inline void print_report(std::ostream& out, const ConditionReport& r) {
  for (const auto& e : r.entries)
    out << "  " << std::left << std::setw(8) << e.id << std::setw(5)
        << (e.satisfied ? "ok" : "FAIL") << std::setw(5) << (e.required ? "req" : "-")
        << std::scientific << std::setprecision(3) << e.residual << std::defaultfloat << "  "
        << e.identity << '\n';
  out << "  verdict: " << to_string(r.verdict) << '\n';
}

inline int cmd_check(const std::string& source, const std::string& target_text, double tol,
                     bool as_json, std::ostream& out, std::ostream& err) {
  OrderTarget target;
  SchemeCheck c;
  try {
    target = parse_order_target(target_text);
    if (!(tol > 0.0)) throw DomainError("--tol must be positive");
    c = check_scheme(resolve_scheme_text(source), target, tol);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  if (as_json) {
    out << to_json(c).dump(2) << '\n';
  } else {
    out << c.scheme << " against " << to_string(target) << " (tol " << tol << ")\n";
    out << "order conditions:\n";
    print_report(out, c.order);
    out << "symplecticity:\n";
    print_report(out, c.symplectic);
    if (c.target_met) {
      out << "target met\n";
    } else {
      out << "target not met; failing conditions:";
      for (const auto& id : c.order.failing()) out << ' ' << id;
      out << '\n';
    }
  }
  return c.target_met ? kOk : kTargetUnmet;
}

inline int cmd_export(const std::string& spec, const std::string& path, std::ostream& out,
                      std::ostream& err) {
  try {
    const auto doc = to_json(resolve_scheme_text(spec)).dump(2);
    if (path.empty()) {
      out << doc << '\n';
    } else {
      std::ofstream f(path);
      if (!(f << doc << '\n')) throw Error("cannot write '" + path + "'");
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  return kOk;
}

inline int cmd_dump_noise(std::size_t channels, double h, std::size_t steps, std::uint64_t seed,
                          const std::string& path, std::ostream& err) {
  try {
    const auto p = sample_path(channels, h, steps, seed);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot open '" + path + "'");
    write_binary(p, f);
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}

inline int cmd_run(const std::string& config_path, const RunOverrides& ov, std::ostream& out,
                   std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path, ov);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kUsage;
  }
  try {
    // with data on stdout the summary goes to stderr
    std::ostream& log = cfg.out_path.empty() ? err : out;
    return run_experiment(cfg, out, log);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
}

/// Entry point shared by the executable and the tests.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
                std::ostream& err = std::cerr) {
  CLI::App app{"Stochastic symplectic Runge-Kutta schemes for additive-noise Hamiltonian systems"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  auto* list = app.add_subcommand("list-schemes", "Builtin schemes with their verified properties");

  std::string source, target = "ms_1_5";
  double tol = kDefaultConditionTol;
  bool as_json = false;
  auto* check = app.add_subcommand("check", "Check a tableau's order conditions and symplecticity");
  check->add_option("source", source, "Tableau JSON file or builtin spec such as ssrk_alpha1:0.5")
      ->required();
  check->add_option("--target", target, "ms_1_0, ms_1_5 or ms_2_0_second_order")
      ->capture_default_str();
  check->add_option("--tol", tol, "Residual tolerance")->capture_default_str();
  check->add_flag("--json", as_json, "Print the report as JSON");

  std::string config;
  std::uint64_t seed = 0;
  std::size_t paths = 0, threads = 0;
  std::string out_path, format;
  auto* run = app.add_subcommand("run", "Run an experiment from a JSON config");
  run->add_option("--config", config, "Experiment config file")->required()->check(CLI::ExistingFile);
  auto* seed_opt = run->add_option("--seed", seed, "Override the base seed");
  auto* paths_opt = run->add_option("--paths", paths, "Override n_paths");
  auto* out_opt = run->add_option("--out", out_path, "Output file (default: stdout)");
  auto* format_opt =
      run->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
  auto* threads_opt = run->add_option("--threads", threads, "Worker threads (0: all cores)");

  std::string export_spec, export_out;
  auto* exp = app.add_subcommand("export", "Write a builtin tableau as JSON");
  exp->add_option("scheme", export_spec, "Builtin spec such as ssrk_alpha1:0.5")->required();
  exp->add_option("--out", export_out, "Output file (default: stdout)");

  std::size_t channels = 1, steps = 1000;
  double h = 0.001;
  std::uint64_t noise_seed = 1;
  std::string noise_out;
  auto* dump = app.add_subcommand("dump-noise", "Write a sampled increment path in binary form");
  dump->add_option("--channels", channels)->capture_default_str();
  dump->add_option("--step", h, "Fine step size")->capture_default_str();
  dump->add_option("--steps", steps)->capture_default_str();
  dump->add_option("--seed", noise_seed)->capture_default_str();
  dump->add_option("--out", noise_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  if (*list) return cmd_list_schemes(out);
  if (*check) return cmd_check(source, target, tol, as_json, out, err);
  if (*exp) return cmd_export(export_spec, export_out, out, err);
  if (*dump) return cmd_dump_noise(channels, h, steps, noise_seed, noise_out, err);
  RunOverrides ov;
  if (*seed_opt) ov.seed = seed;
  if (*paths_opt) ov.paths = paths;
  if (*out_opt) ov.out = out_path;
  if (*format_opt) ov.format = format;
  if (*threads_opt) ov.threads = threads;
  return cmd_run(config, ov, out, err);
}

}  // namespace ssrk::cli
