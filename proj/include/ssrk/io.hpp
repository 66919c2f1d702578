#pragma once

#include <charconv>
#include <concepts>
#include <cstdint>
#include <cmath>
#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ssrk/analysis.hpp"
#include "ssrk/noise.hpp"
#include "ssrk/stats.hpp"
#include "ssrk/tableau.hpp"
#include "ssrk/version.hpp"

namespace ssrk {

/// Text of the path-partitioning policy; results are reproducible under it.
inline std::string partitioning_policy() {
  return "fixed blocks of " + std::to_string(kPathBlock) +
         " paths, path p seeded with seed + p, blocks reduced in index order";
}

/// Provenance object embedded in every output file.
inline nlohmann::json make_metadata(const nlohmann::json& config) {
  return {{"library", "ssrk"},
          {"version", std::string(kVersion)},
          {"noise_generator", std::string(kNoiseGeneratorId)},
          {"partitioning", partitioning_policy()},
          {"config", config}};
}

// ---------------------------------------------------------------------------
// CSV (RFC 4180, CRLF-free: rows end with '\n'; '.' decimal separator)

/// Shortest round-trip decimal form; independent of the C locale.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  out += '"';
  return out;
}

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  /// '#' lines carrying version and the compact metadata object.
  void preamble(const nlohmann::json& metadata) {
    out_ << "# ssrk " << kVersion << '\n';
    out_ << "# metadata: " << metadata.dump() << '\n';
  }

  CsvWriter& field(std::string_view s) {
    sep();
    out_ << csv_field(s);
    return *this;
  }
  CsvWriter& field(double v) { return field(format_number(v)); }
  template <std::unsigned_integral U>
  CsvWriter& field(U v) {
    return field(std::to_string(v));
  }

  void end_row() {
    out_ << '\n';
    first_ = true;
  }

  void row(std::initializer_list<std::string_view> cells) {
    for (auto c : cells) field(c);
    end_row();
  }

 private:
  void sep() {
    if (!first_) out_ << ',';
    first_ = false;
  }
  std::ostream& out_;
  bool first_ = true;
};

// ---------------------------------------------------------------------------
// Result records

inline nlohmann::json to_json(const ConvergenceResult& r) {
  return {{"scheme", r.scheme},
          {"step_sizes", r.step_sizes},
          {"rms_errors", r.rms_errors},
          {"rms_stderr", r.rms_stderr},
          {"fitted_order", r.fitted_order},
          {"order_stderr", r.order_stderr},
          {"n_paths", r.n_paths},
          {"failed_paths", r.failed_paths},
          {"seed", r.seed},
          {"reference_h", r.reference_h},
          {"reference_scheme", r.reference_scheme}};
}

inline nlohmann::json to_json(const GrowthResult& r) {
  return {{"scheme", r.scheme},
          {"h", r.h},
          {"T", r.T},
          {"times", r.times},
          {"mean_H0", r.mean_H0},
          {"mean_state", r.mean_state},
          {"fitted_slope", r.fitted_slope},
          {"slope_stderr", r.slope_stderr},
          {"fitted_intercept", r.fitted_intercept},
          {"expected_slope", r.expected_slope},
          {"expected_intercept", r.expected_intercept},
          {"n_paths", r.n_paths},
          {"failed_paths", r.failed_paths},
          {"seed", r.seed},
          {"record_stride", r.record_stride}};
}

inline nlohmann::json to_json(const ConditionReport& r) {
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : r.entries) {
    entries.push_back({{"id", e.id},
                       {"identity", e.identity},
                       {"residual", e.residual},
                       {"satisfied", e.satisfied},
                       {"required", e.required}});
  }
  return {{"verdict", std::string(to_string(r.verdict))},
          {"tolerance", r.tolerance},
          {"max_abs_residual", r.max_abs_residual},
          {"entries", std::move(entries)}};
}

/// One point of a drift-constant curve.
struct DriftPoint {
  std::string curve;   // e.g. "ssrk_alpha1(0.3)" or "midpoint"
  std::string method;  // "closed_form" or "moment_oracle"
  double h = 0.0;
  double C = 0.0;
};

inline nlohmann::json to_json(const DriftPoint& d) {
  return {{"curve", d.curve}, {"method", d.method}, {"h", d.h}, {"C", d.C}};
}

/// Outcome of checking one scheme against a target.
struct SchemeCheck {
  std::string scheme;
  OrderTarget target = OrderTarget::ms_1_5;
  ConditionReport order;
  ConditionReport symplectic;
  bool target_met = false;
};

inline nlohmann::json to_json(const SchemeCheck& c) {
  return {{"scheme", c.scheme},
          {"target", std::string(to_string(c.target))},
          {"target_met", c.target_met},
          {"order", to_json(c.order)},
          {"symplectic", to_json(c.symplectic)}};
}

inline SchemeCheck check_scheme(const Tableau& t, OrderTarget target,
                                double tol = kDefaultConditionTol) {
  SchemeCheck c;
  c.scheme = t.name();
  c.target = target;
  c.order = check_order_conditions(t, target, tol);
  c.symplectic = check_symplectic(t, tol);
  c.target_met = meets(c.order, target);
  return c;
}

/// {"metadata": ..., "results": [...]} with the given record list.
template <class R>
nlohmann::json results_document(std::span<const R> results, const nlohmann::json& metadata) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : results) arr.push_back(to_json(r));
  return {{"metadata", metadata}, {"results", std::move(arr)}};
}

// ---------------------------------------------------------------------------
// CSV tables

/// One row per (scheme, h).
inline void write_convergence_csv(std::ostream& out, std::span<const ConvergenceResult> results,
                                  const nlohmann::json& metadata) {
  CsvWriter w(out);
  w.preamble(metadata);
  w.row({"scheme", "h", "rms_error", "rms_stderr", "fitted_order", "order_stderr", "n_paths",
         "failed_paths", "seed", "reference_h", "reference_scheme"});
  for (const auto& r : results) {
    for (std::size_t i = 0; i < r.step_sizes.size(); ++i) {
      w.field(r.scheme)
          .field(r.step_sizes[i])
          .field(r.rms_errors[i])
          .field(r.rms_stderr[i])
          .field(r.fitted_order)
          .field(r.order_stderr)
          .field(r.n_paths)
          .field(r.failed_paths)
          .field(r.seed)
          .field(r.reference_h)
          .field(r.reference_scheme);
      w.end_row();
    }
  }
}

/// Column names of a state of dimension d: (p, q) in the planar case, else p1..pn, q1..qn.
inline std::vector<std::string> state_column_names(std::size_t d) {
  if (d == 2) return {"p", "q"};
  std::vector<std::string> names;
  if (d % 2 == 0) {
    for (std::size_t i = 1; i <= d / 2; ++i) names.push_back("p" + std::to_string(i));
    for (std::size_t i = 1; i <= d / 2; ++i) names.push_back("q" + std::to_string(i));
  } else {
    for (std::size_t i = 1; i <= d; ++i) names.push_back("y" + std::to_string(i));
  }
  return names;
}

/// One row per (scheme, t): mean H0, its expected value, and the mean path.
inline void write_growth_csv(std::ostream& out, std::span<const GrowthResult> results,
                             const nlohmann::json& metadata) {
  CsvWriter w(out);
  w.preamble(metadata);
  const std::size_t d =
      results.empty() || results[0].mean_state.empty() ? 0 : results[0].mean_state[0].size();
  w.field("scheme").field("t").field("mean_H0").field("expected_H0");
  for (const auto& n : state_column_names(d)) w.field("mean_" + n);
  w.end_row();
  for (const auto& r : results) {
    for (std::size_t i = 0; i < r.times.size(); ++i) {
      w.field(r.scheme).field(r.times[i]).field(r.mean_H0[i]);
      w.field(r.expected_intercept + r.expected_slope * r.times[i]);
      for (double x : r.mean_state[i]) w.field(x);
      w.end_row();
    }
  }
}

inline void write_drift_csv(std::ostream& out, std::span<const DriftPoint> points,
                            const nlohmann::json& metadata) {
  CsvWriter w(out);
  w.preamble(metadata);
  w.row({"curve", "method", "h", "C"});
  for (const auto& p : points) {
    w.field(p.curve).field(p.method).field(p.h).field(p.C);
    w.end_row();
  }
}

/// One row per (scheme, condition).
inline void write_check_csv(std::ostream& out, std::span<const SchemeCheck> checks,
                            const nlohmann::json& metadata) {
  CsvWriter w(out);
  w.preamble(metadata);
  w.row({"scheme", "kind", "id", "identity", "residual", "satisfied", "required", "verdict"});
  for (const auto& c : checks) {
    auto emit = [&](std::string_view kind, const ConditionReport& rep) {
      for (const auto& e : rep.entries) {
        w.field(c.scheme).field(kind).field(e.id).field(e.identity).field(e.residual);
        w.field(e.satisfied ? "true" : "false").field(e.required ? "true" : "false");
        w.field(to_string(rep.verdict));
        w.end_row();
      }
    };
    emit("order", c.order);
    emit("symplectic", c.symplectic);
  }
}

}  // namespace ssrk
