#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ssrk/errors.hpp"
#include "ssrk/integrator.hpp"
#include "ssrk/noise.hpp"
#include "ssrk/sde.hpp"
#include "ssrk/stats.hpp"
#include "ssrk/tableau.hpp"

namespace ssrk {

// ---------------------------------------------------------------------------
// Mean-square convergence

enum class ReferenceKind { fine_ssrk };

struct ConvergenceOptions {
  ReferenceKind reference = ReferenceKind::fine_ssrk;
  double reference_h = 0x1.0p-12;
  std::size_t threads = 0;  // 0: all available cores
  SolverConfig solver{};
  double max_failed_fraction = 0.01;
};

struct ConvergenceResult {
  std::string scheme;
  std::vector<double> step_sizes;  // strictly decreasing
  std::vector<double> rms_errors;
  std::vector<double> rms_stderr;
  double fitted_order = 0.0;   // least-squares slope of log2(rms) on log2(h)
  double order_stderr = 0.0;
  std::size_t n_paths = 0;     // paths that entered the estimate
  std::size_t failed_paths = 0;
  std::uint64_t seed = 0;
  double reference_h = 0.0;
  std::string reference_scheme;
};

/// k with T / h == 2^k, or -1 when h is not a dyadic fraction of T.
inline int dyadic_exponent(double T, double h) {
  if (!(T > 0.0) || !(h > 0.0)) return -1;
  const double ratio = T / h;
  const double k = std::round(std::log2(ratio));
  if (k < 0 || k > 60) return -1;
  if (std::abs(std::ldexp(1.0, static_cast<int>(k)) - ratio) > 1e-9 * ratio) return -1;
  return static_cast<int>(k);
}

namespace detail {

struct OrderFit {
  double order = 0.0;
  double stderr_ = 0.0;
};

// Slope of log2(rms) against log2(h); the uncertainty combines the fit residuals with
// the Monte Carlo error of each point, the latter treated as independent.
inline OrderFit fit_order(std::span<const double> h, std::span<const double> rms,
                          std::span<const double> rms_se) {
  std::vector<double> x(h.size()), y(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    x[i] = std::log2(h[i]);
    y[i] = std::log2(rms[i]);
  }
  const auto fit = least_squares(x, y);
  const auto w = slope_weights(x);
  double var_mc = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double sd_log = rms_se[i] / (rms[i] * std::numbers::ln2);
    var_mc += w[i] * w[i] * sd_log * sd_log;
  }
  return {fit.slope, std::sqrt(var_mc + fit.slope_stderr * fit.slope_stderr)};
}

}  // namespace detail

/**
 * Root-mean-square error at time T of each scheme on each step size, with common random
 * numbers: path p draws one fine path at reference_h from seed + p, which drives both the
 * reference trajectory (SSRK-0.5 at reference_h) and every coarse run via aggregation.
 * Paths on which a scheme's solver fails are excluded for that scheme and counted.
 */
template <int Dim>
std::vector<ConvergenceResult> ms_convergence(const AdditiveSde<Dim>& sde,
                                              const typename AdditiveSde<Dim>::State& y0,
                                              std::span<const Tableau> schemes,
                                              std::vector<double> h_list, double T,
                                              std::size_t n_paths, std::uint64_t seed,
                                              const ConvergenceOptions& opts = {}) {
  using State = typename AdditiveSde<Dim>::State;
  if (schemes.empty()) throw DomainError("ms_convergence: no schemes given");
  if (h_list.size() < 2) throw DomainError("ms_convergence: at least two step sizes required");
  if (n_paths < 2) throw DomainError("ms_convergence: at least two paths required");
  opts.solver.validate();
  std::sort(h_list.begin(), h_list.end(), std::greater<>());
  const int k_ref = dyadic_exponent(T, opts.reference_h);
  if (k_ref < 0)
    throw DomainError("ms_convergence: reference step " + std::to_string(opts.reference_h) +
                      " is not T / 2^k");
  std::vector<std::size_t> factors, steps;
  for (std::size_t i = 0; i < h_list.size(); ++i) {
    const int k = dyadic_exponent(T, h_list[i]);
    if (k < 0)
      throw DomainError("ms_convergence: step " + std::to_string(h_list[i]) + " is not T / 2^k");
    if (i > 0 && !(h_list[i] < h_list[i - 1]))
      throw DomainError("ms_convergence: step sizes must be distinct");
    if (k > k_ref)
      throw DomainError("ms_convergence: step " + std::to_string(h_list[i]) +
                        " is finer than the reference step");
    factors.push_back(std::size_t{1} << (k_ref - k));
    steps.push_back(std::size_t{1} << k);
  }
  const std::size_t n_ref = std::size_t{1} << k_ref;
  const Tableau reference = make_builtin(Builtin::ssrk_alpha1, {0.5});

  const std::size_t ns = schemes.size();
  const std::size_t nh = h_list.size();
  // sq[(s * nh + i) * n_paths + p]
  std::vector<double> sq(ns * nh * n_paths, 0.0);
  std::vector<char> failed(ns * n_paths, 0);

  for_each_block(n_paths, opts.threads, [&](std::size_t, std::size_t first, std::size_t last) {
    Stepper<Dim> ref_stepper(sde, reference, opts.solver);
    std::vector<Stepper<Dim>> steppers;
    steppers.reserve(ns);
    for (const auto& tab : schemes) steppers.emplace_back(sde, tab, opts.solver);
    auto noop = [](std::size_t, double, const State&) {};
    for (std::size_t p = first; p < last; ++p) {
      const NoisePath path = sample_path(sde.channels(), opts.reference_h, n_ref, seed + p);
      State y_ref;
      try {
        y_ref = integrate(ref_stepper, y0, 0.0, opts.reference_h, n_ref, path, 1, noop);
      } catch (const ConvergenceError&) {
        for (std::size_t s = 0; s < ns; ++s) failed[s * n_paths + p] = 1;
        continue;
      }
      for (std::size_t s = 0; s < ns; ++s) {
        for (std::size_t i = 0; i < nh; ++i) {
          try {
            const State y =
                integrate(steppers[s], y0, 0.0, h_list[i], steps[i], path, factors[i], noop);
            sq[(s * nh + i) * n_paths + p] = (y - y_ref).squaredNorm();
          } catch (const ConvergenceError&) {
            failed[s * n_paths + p] = 1;
            break;
          }
        }
      }
    }
  });

  std::vector<ConvergenceResult> results;
  for (std::size_t s = 0; s < ns; ++s) {
    ConvergenceResult res;
    res.scheme = schemes[s].name();
    res.step_sizes = h_list;
    res.seed = seed;
    res.reference_h = opts.reference_h;
    res.reference_scheme = reference.name();
    std::size_t n_fail = 0;
    for (std::size_t p = 0; p < n_paths; ++p) n_fail += failed[s * n_paths + p] ? 1 : 0;
    res.failed_paths = n_fail;
    res.n_paths = n_paths - n_fail;
    if (static_cast<double>(n_fail) > opts.max_failed_fraction * static_cast<double>(n_paths))
      throw ExperimentError("ms_convergence: scheme '" + res.scheme + "' failed on " +
                            std::to_string(n_fail) + " of " + std::to_string(n_paths) + " paths");
    if (res.n_paths < 2) throw ExperimentError("ms_convergence: too few successful paths");
    const auto M = static_cast<double>(res.n_paths);
    for (std::size_t i = 0; i < nh; ++i) {
      const double* e2 = &sq[(s * nh + i) * n_paths];
      CompensatedSum sum;
      for (std::size_t p = 0; p < n_paths; ++p)
        if (!failed[s * n_paths + p]) sum.add(e2[p]);
      const double mse = sum.value() / M;
      CompensatedSum dev;
      for (std::size_t p = 0; p < n_paths; ++p)
        if (!failed[s * n_paths + p]) dev.add((e2[p] - mse) * (e2[p] - mse));
      const double se_mse = std::sqrt(dev.value() / (M - 1.0) / M);
      const double rms = std::sqrt(mse);
      if (!(rms > 0.0) || !std::isfinite(rms))
        throw ExperimentError("ms_convergence: scheme '" + res.scheme +
                              "' has zero or non-finite error at h = " + std::to_string(h_list[i]));
      res.rms_errors.push_back(rms);
      res.rms_stderr.push_back(se_mse / (2.0 * rms));
    }
    const auto fit = detail::fit_order(res.step_sizes, res.rms_errors, res.rms_stderr);
    res.fitted_order = fit.order;
    res.order_stderr = fit.stderr_;
    results.push_back(std::move(res));
  }
  return results;
}

// ---------------------------------------------------------------------------
// Energy growth

struct GrowthOptions {
  std::size_t record_stride = 0;  // 0: max(1, n_steps / 1000)
  std::size_t threads = 0;
  SolverConfig solver{};
  double max_failed_fraction = 0.01;
};

struct GrowthResult {
  std::string scheme;
  double h = 0.0;
  double T = 0.0;
  std::vector<double> times;
  std::vector<double> mean_H0;
  std::vector<std::vector<double>> mean_state;  // per recorded time, per component
  double fitted_slope = 0.0;
  double slope_stderr = 0.0;     // Monte Carlo standard error of the slope
  double fitted_intercept = 0.0;
  double expected_slope = 0.0;
  double expected_intercept = 0.0;
  std::size_t n_paths = 0;
  std::size_t failed_paths = 0;
  std::uint64_t seed = 0;
  std::size_t record_stride = 1;
};

/// Step indices 0, stride, 2 stride, ... and n_steps.
inline std::vector<std::size_t> record_steps(std::size_t n_steps, std::size_t stride) {
  if (stride < 1) throw DomainError("record stride must be at least 1");
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k <= n_steps; k += stride) out.push_back(k);
  if (out.back() != n_steps) out.push_back(n_steps);
  return out;
}

inline std::size_t steps_for_horizon(double T, double h) {
  if (!(h > 0.0) || !(T > 0.0)) throw DomainError("horizon and step must be positive");
  const double ratio = T / h;
  const double n = std::round(ratio);
  if (n < 1 || std::abs(n - ratio) > 1e-9 * ratio)
    throw DomainError("T / h = " + std::to_string(ratio) + " is not an integer");
  return static_cast<std::size_t>(n);
}

/**
 * Mean of H0 over n_paths trajectories (path p seeded with seed + p) at the recorded
 * times, with its least-squares slope. The slope's standard error comes from the spread
 * of per-path least-squares slopes, whose mean equals the slope of the mean series.
 */
template <int Dim>
GrowthResult energy_growth(const AdditiveSde<Dim>& sde, const typename AdditiveSde<Dim>::State& y0,
                           const EnergyLaw<Dim>& energy, const Tableau& scheme, double h, double T,
                           std::size_t n_paths, std::uint64_t seed, const GrowthOptions& opts = {}) {
  using State = typename AdditiveSde<Dim>::State;
  if (n_paths < 2) throw DomainError("energy_growth: at least two paths required");
  if (!energy.H0) throw StructuralError("energy_growth: energy law has no H0");
  opts.solver.validate();
  const std::size_t n_steps = steps_for_horizon(T, h);
  const std::size_t stride =
      opts.record_stride > 0 ? opts.record_stride : std::max<std::size_t>(1, n_steps / 1000);
  const auto rec = record_steps(n_steps, stride);
  const std::size_t nr = rec.size();
  if (nr < 2) throw DomainError("energy_growth: fewer than two recorded times");
  const std::size_t d = sde.dim();

  GrowthResult res;
  res.scheme = scheme.name();
  res.h = h;
  res.T = T;
  res.seed = seed;
  res.record_stride = stride;
  res.expected_slope = energy.expected_slope;
  res.expected_intercept = energy.intercept;
  for (auto k : rec) res.times.push_back(static_cast<double>(k) * h);
  const auto w = slope_weights(res.times);

  const std::size_t n_blocks = (n_paths + kPathBlock - 1) / kPathBlock;
  struct Block {
    std::vector<CompensatedSum> H;
    std::vector<CompensatedSum> X;  // nr * d
  };
  std::vector<Block> blocks(n_blocks);
  std::vector<double> path_slope(n_paths, std::numeric_limits<double>::quiet_NaN());

  for_each_block(n_paths, opts.threads, [&](std::size_t b, std::size_t first, std::size_t last) {
    Stepper<Dim> stepper(sde, scheme, opts.solver);
    Block& blk = blocks[b];
    blk.H.assign(nr, {});
    blk.X.assign(nr * d, {});
    std::vector<double> H(nr);
    std::vector<double> X(nr * d);
    for (std::size_t p = first; p < last; ++p) {
      const NoisePath path = sample_path(sde.channels(), h, n_steps, seed + p);
      std::size_t next = 0;
      try {
        integrate(stepper, y0, 0.0, h, n_steps, path, 1,
                  [&](std::size_t k, double, const State& y) {
                    if (next < nr && rec[next] == k) {
                      H[next] = energy.H0(y);
                      for (std::size_t j = 0; j < d; ++j)
                        X[next * d + j] = y(static_cast<Eigen::Index>(j));
                      ++next;
                    }
                  });
      } catch (const ConvergenceError&) {
        continue;
      }
      double slope = 0.0;
      for (std::size_t i = 0; i < nr; ++i) {
        blk.H[i].add(H[i]);
        slope += w[i] * H[i];
      }
      for (std::size_t i = 0; i < nr * d; ++i) blk.X[i].add(X[i]);
      path_slope[p] = slope;
    }
  });

  std::size_t n_fail = 0;
  for (double s : path_slope) n_fail += std::isnan(s) ? 1 : 0;
  res.failed_paths = n_fail;
  res.n_paths = n_paths - n_fail;
  if (static_cast<double>(n_fail) > opts.max_failed_fraction * static_cast<double>(n_paths))
    throw ExperimentError("energy_growth: scheme '" + res.scheme + "' failed on " +
                          std::to_string(n_fail) + " of " + std::to_string(n_paths) + " paths");
  if (res.n_paths < 2) throw ExperimentError("energy_growth: too few successful paths");
  const auto M = static_cast<double>(res.n_paths);

  for (std::size_t i = 0; i < nr; ++i) {
    CompensatedSum total;
    for (const auto& blk : blocks) total.add(blk.H[i]);
    res.mean_H0.push_back(total.value() / M);
    std::vector<double> xs(d);
    for (std::size_t j = 0; j < d; ++j) {
      CompensatedSum sx;
      for (const auto& blk : blocks) sx.add(blk.X[i * d + j]);
      xs[j] = sx.value() / M;
    }
    res.mean_state.push_back(std::move(xs));
  }
  const auto fit = least_squares(res.times, res.mean_H0);
  res.fitted_slope = fit.slope;
  res.fitted_intercept = fit.intercept;

  CompensatedSum dev;
  for (double s : path_slope)
    if (!std::isnan(s)) dev.add((s - fit.slope) * (s - fit.slope));
  res.slope_stderr = std::sqrt(dev.value() / (M - 1.0) / M);
  return res;
}

// ---------------------------------------------------------------------------
// Closed-form drift constants of the linear-growth slope on the harmonic oscillator

enum class DriftConstantKind { c_ssrk05, c_alpha1, c_b1_at_alpha_half };

inline std::string_view to_string(DriftConstantKind k) {
  switch (k) {
    case DriftConstantKind::c_ssrk05: return "c_ssrk05";
    case DriftConstantKind::c_alpha1: return "c_alpha1";
    case DriftConstantKind::c_b1_at_alpha_half: return "c_b1_at_alpha_half";
  }
  return "unknown";
}

/**
 * c_ssrk05:           C(h) = [-16(4 - sqrt6) h^2 + (4 - sqrt6) h^4] / [3 (16 + h^2)^2]
 * c_alpha1 [a]:       C_a(h) for SSRK-alpha1
 * c_b1_at_alpha_half: C_b1(h) = (3 sqrt(2 - 3 b1^2) - 3 b1 - 4)(16 - h^2) h^2 / [3 (16 + h^2)]
 *
 * The c_b1 expression is evaluated as written. Its zeros b1 = (-2 +- sqrt6)/6
 * are exact, but away from them it is (16 + h^2) times the slope defect obtained from the
 * second-moment recursion (see moment_slope_oracle).
 */
inline double drift_constant(DriftConstantKind kind, double h, std::span<const double> params = {}) {
  if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("drift_constant: h must be positive");
  const double s6 = std::sqrt(6.0);
  const double h2 = h * h;
  switch (kind) {
    case DriftConstantKind::c_ssrk05: {
      if (!params.empty()) throw DomainError("drift_constant(c_ssrk05) takes no parameters");
      const double den = 16.0 + h2;
      return (-16.0 * (4.0 - s6) * h2 + (4.0 - s6) * h2 * h2) / (3.0 * den * den);
    }
    case DriftConstantKind::c_alpha1: {
      if (params.size() != 1) throw DomainError("drift_constant(c_alpha1) takes alpha1");
      const double a = params[0];
      if (!(a > 0.0 && a < 1.0))
        throw DomainError("drift_constant(c_alpha1): alpha1 = " + std::to_string(a) +
                          " violates 0 < alpha1 < 1");
      const double r = std::sqrt(1.0 / a - 1.0);
      const double num = (s6 * a + 2.0 * r - s6) * h2 * ((a - 1.0) * a * h2 + 4.0);
      const double den = 6.0 * r * ((a - 1.0) * (a - 1.0) * h2 + 4.0) * (a * a * h2 + 4.0);
      return -num / den;
    }
    case DriftConstantKind::c_b1_at_alpha_half: {
      if (params.size() != 1) throw DomainError("drift_constant(c_b1_at_alpha_half) takes b1");
      const double b = params[0];
      const double bound = std::sqrt(2.0 / 3.0);
      if (!(std::abs(b) < bound))
        throw DomainError("drift_constant(c_b1_at_alpha_half): b1 = " + std::to_string(b) +
                          " violates |b1| < sqrt(2/3)");
      return (3.0 * std::sqrt(2.0 - 3.0 * b * b) - 3.0 * b - 4.0) * (16.0 - h2) * h2 /
             (3.0 * (16.0 + h2));
    }
  }
  throw DomainError("drift_constant: unknown kind");
}

inline double drift_constant(DriftConstantKind kind, double h, std::initializer_list<double> params) {
  return drift_constant(kind, h, std::span<const double>(params.begin(), params.size()));
}

// ---------------------------------------------------------------------------
// Second-moment recursion on the harmonic oscillator

struct MomentOracleOptions {
  std::size_t n_steps = 1000;
  std::size_t stride = 1;
  Eigen::Vector2d y0 = Eigen::Vector2d::Zero();
};

/**
 * Exact E[H0(y_n)], H0 = |y|^2 / 2, of a scheme applied to dP = -Q dt + sigma dW,
 * dQ = P dt, at steps record_steps(n_steps, stride). Uses the exact affine step map
 * y_{n+1} = R y_n + u I + v I0/h and
 *   S_{n+1} = R S_n R^T + h u u^T + (h/2)(u v^T + v u^T) + (h/3) v v^T,  S_0 = y0 y0^T.
 */
inline std::vector<double> expected_energy_series(const Tableau& tab, double sigma, double h,
                                                  const MomentOracleOptions& opts = {}) {
  Eigen::MatrixXd L(2, 2);
  L << 0.0, -1.0, 1.0, 0.0;
  const std::vector<Eigen::VectorXd> g = {Eigen::Vector2d(sigma, 0.0)};
  const auto map = one_step_affine_map(L, g, tab, h);
  const Eigen::VectorXd& u = map.u[0];
  const Eigen::VectorXd& v = map.v[0];
  const Eigen::MatrixXd Q = h * u * u.transpose() +
                            (h / 2.0) * (u * v.transpose() + v * u.transpose()) +
                            (h / 3.0) * v * v.transpose();
  const auto rec = record_steps(opts.n_steps, opts.stride);
  Eigen::MatrixXd S = opts.y0 * opts.y0.transpose();
  std::vector<double> out;
  out.reserve(rec.size());
  std::size_t next = 0;
  for (std::size_t k = 0; k <= opts.n_steps; ++k) {
    if (next < rec.size() && rec[next] == k) {
      out.push_back(0.5 * S.trace());
      ++next;
    }
    if (k < opts.n_steps) S = map.R * S * map.R.transpose() + Q;
  }
  return out;
}

/// Least-squares growth rate per unit time of the exact E[H0] series.
inline double moment_slope_oracle(const Tableau& tab, double sigma, double h,
                                  const MomentOracleOptions& opts = {}) {
  const auto series = expected_energy_series(tab, sigma, h, opts);
  const auto rec = record_steps(opts.n_steps, opts.stride);
  std::vector<double> t(rec.size());
  for (std::size_t i = 0; i < rec.size(); ++i) t[i] = static_cast<double>(rec[i]) * h;
  return least_squares(t, series).slope;
}

}  // namespace ssrk
