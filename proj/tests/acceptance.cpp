// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "ssrk/analysis.hpp"
#include "ssrk/integrator.hpp"
#include "ssrk/noise.hpp"
#include "ssrk/sde.hpp"
#include "ssrk/tableau.hpp"

namespace {

using ssrk::Builtin;
using ssrk::DriftConstantKind;
using ssrk::OrderTarget;
using V2 = Eigen::Vector2d;

int g_failures = 0;

struct Criterion {
  std::string name;
  bool ok = true;
  std::ostringstream detail;

  void require(bool cond, const std::string& what) {
    if (!cond) {
      if (ok) detail << " | failed: ";
      else detail << "; ";
      detail << what;
      ok = false;
    }
  }
};

template <class Body>
void run(const std::string& name, Body body) {
  Criterion c;
  c.name = name;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.require(false, std::string("exception: ") + e.what());
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (!c.ok) ++g_failures;
  std::printf("%s  %s (%.1f s)%s\n", c.ok ? "PASS" : "FAIL", c.name.c_str(), secs,
              c.detail.str().c_str());
  std::fflush(stdout);
}

std::string num(double v, int prec = 4) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", prec, v);
  return buf;
}

ssrk::Tableau builtin(Builtin b, std::initializer_list<double> p = {}) {
  return ssrk::make_builtin(b, p);
}

const double kB1Root = (-2.0 + std::sqrt(6.0)) / 6.0;

// Exact RMS error at T = n h of a linear scheme on the oscillator (Ito isometry), shown
// next to the Monte Carlo estimate.
double exact_rms_error(const ssrk::Tableau& tab, double sigma, const V2& y0, double h, int n) {
  const Eigen::Matrix2d L = (Eigen::Matrix2d() << 0, -1, 1, 0).finished();
  const auto map = ssrk::one_step_affine_map(L, {V2(sigma, 0.0)}, tab, h);
  const Eigen::Matrix2d R = map.R;
  const V2 u = map.u[0], v = map.v[0];
  auto flow = [](double t) {
    return (Eigen::Matrix2d() << std::cos(t), -std::sin(t), std::sin(t), std::cos(t)).finished();
  };
  const V2 g(sigma, 0.0);
  const double x[8] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290,
                       -0.1834346424956498, 0.1834346424956498,  0.5255324099163290,
                       0.7966664774136267,  0.9602898564975363};
  const double w[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873,
                       0.3626837833783620, 0.3626837833783620, 0.3137066458778873,
                       0.2223810344533745, 0.1012285362903763};
  const double T = h * n;
  Eigen::Matrix2d Rn = Eigen::Matrix2d::Identity();
  for (int k = 0; k < n; ++k) Rn = R * Rn;
  double total = (Rn * y0 - flow(T) * y0).squaredNorm();
  Eigen::Matrix2d P = Eigen::Matrix2d::Identity();
  for (int k = n - 1; k >= 0; --k) {
    const double a = k * h, b = (k + 1) * h;
    for (int q = 0; q < 8; ++q) {
      const double s = 0.5 * (a + b) + 0.5 * h * x[q];
      total += 0.5 * h * w[q] * (P * (u + v * ((b - s) / h)) - flow(T - s) * g).squaredNorm();
    }
    P = P * R;
  }
  return std::sqrt(total);
}

std::vector<double> dyadic_ladder(int first, int last) {
  std::vector<double> h;
  for (int k = first; k <= last; ++k) h.push_back(std::ldexp(1.0, -k));
  return h;
}

void check_orders(Criterion& c, const std::vector<ssrk::ConvergenceResult>& res,
                  const std::vector<double>& expected, double band) {
  for (std::size_t s = 0; s < res.size(); ++s) {
    c.detail << (s ? ", " : ": ") << res[s].scheme << " " << num(res[s].fitted_order, 3) << " +- "
             << num(res[s].order_stderr, 2);
    c.require(std::abs(res[s].fitted_order - expected[s]) <= band,
              res[s].scheme + " order " + num(res[s].fitted_order, 3) + " not within " +
                  num(band) + " of " + num(expected[s], 3));
  }
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

template <class F>
MeanSe mean_se(const std::vector<ssrk::IncrementPair>& xs, F f) {
  const double n = static_cast<double>(xs.size());
  double s = 0.0, s2 = 0.0;
  for (const auto& x : xs) {
    const double v = f(x);
    s += v;
    s2 += v * v;
  }
  const double m = s / n;
  return {m, std::sqrt((s2 / n - m * m) / (n - 1.0))};
}

void check_moments(Criterion& c, const std::vector<ssrk::IncrementPair>& xs, double h,
                   const std::string& label) {
  struct M {
    const char* name;
    MeanSe got;
    double want;
  };
  const M ms[] = {
      {"E[I]", mean_se(xs, [](const auto& p) { return p.I; }), 0.0},
      {"E[I0]", mean_se(xs, [](const auto& p) { return p.I0; }), 0.0},
      {"E[I^2]", mean_se(xs, [](const auto& p) { return p.I * p.I; }), h},
      {"E[I I0]", mean_se(xs, [](const auto& p) { return p.I * p.I0; }), h * h / 2},
      {"E[I0^2]", mean_se(xs, [](const auto& p) { return p.I0 * p.I0; }), h * h * h / 3},
  };
  double worst = 0.0;
  for (const auto& m : ms) {
    const double z = std::abs(m.got.mean - m.want) / m.got.se;
    worst = std::max(worst, z);
    c.require(z < 3.0, label + " " + m.name + " off by " + num(z, 3) + " SE");
  }
  c.detail << label << " max |z| " << num(worst, 3) << "  ";
}

}  // namespace

int main() {
  run("tableau identities: order conditions and symplecticity of the built-in families",
      [](Criterion& c) {
        double worst = 0.0;
        auto conds = [&](const ssrk::Tableau& t, OrderTarget target) {
          const auto r = ssrk::check_order_conditions(t, target);
          worst = std::max(worst, r.max_abs_residual);
          return r;
        };
        auto sym = [&](const ssrk::Tableau& t) {
          const auto r = ssrk::check_symplectic(t);
          return r.verdict == ssrk::Verdict::symplectic;
        };
        std::size_t n = 0;
        for (int k = 1; k <= 9; ++k) {
          const double a = 0.1 * k;
          const auto ss = builtin(Builtin::ssrk_alpha1, {a});
          const auto sr = builtin(Builtin::srk_alpha1, {a});
          c.require(conds(ss, OrderTarget::ms_1_5).verdict == ssrk::Verdict::order_1_5,
                    ss.name() + " misses 1-10");
          c.require(sym(ss), ss.name() + " not symplectic");
          worst = std::max(worst, ssrk::check_symplectic(ss).max_abs_residual);
          c.require(conds(sr, OrderTarget::ms_1_5).verdict == ssrk::Verdict::order_1_5,
                    sr.name() + " misses 1-10");
          c.require(!sym(sr), sr.name() + " reported symplectic");
          n += 2;
          const double bound = (2.0 / 3.0) * std::sqrt((1.0 - a) / a);
          for (double b : {-0.9 * bound, -0.3 * bound, 0.0, kB1Root, 0.3 * bound, 0.9 * bound}) {
            const auto sb = builtin(Builtin::ssrk_alpha1_b1, {a, b});
            c.require(conds(sb, OrderTarget::ms_1_5).verdict == ssrk::Verdict::order_1_5,
                      sb.name() + " misses 1-10");
            c.require(sym(sb), sb.name() + " not symplectic");
            worst = std::max(worst, ssrk::check_symplectic(sb).max_abs_residual);
            ++n;
          }
        }
        const auto eu = builtin(Builtin::euler_maruyama);
        const auto r = ssrk::check_order_conditions(eu, OrderTarget::ms_1_5);
        std::size_t euler_pass = 0;
        for (std::size_t k = 0; k < 4; ++k) euler_pass += r.entries[k].satisfied;
        worst = std::max(worst, ssrk::check_order_conditions(eu, OrderTarget::ms_1_0).max_abs_residual);
        c.require(euler_pass == 4, "euler fails one of 1-4");
        c.require(r.verdict == ssrk::Verdict::order_1_0, "euler verdict is not order 1.0");
        const auto failing = r.failing();
        c.require(failing == std::vector<std::string>{"5", "7", "8", "9", "10"},
                  "euler failing set differs from 5 7 8 9 10");
        c.require(worst < 1e-12, "max residual " + num(worst));
        c.detail << ": " << n << " tableaux, max residual " << num(worst, 3)
                 << ", euler fails 5 7 8 9 10";
      });

  run("oscillator convergence: orders 1.09 / 2.03 / 2.04 +- 0.25, SSRK rms at h = 2^-5 in [1e-4, 1e-3]",
      [](Criterion& c) {
        const auto sys = ssrk::harmonic_oscillator(1.0, 1.0, 0.0);
        const std::vector<ssrk::Tableau> tabs = {builtin(Builtin::euler_maruyama),
                                                 builtin(Builtin::srk_alpha1, {0.5}),
                                                 builtin(Builtin::ssrk_alpha1, {0.5})};
        ssrk::ConvergenceOptions o;
        o.reference_h = 0x1.0p-12;
        const auto h = dyadic_ladder(1, 5);
        const auto res = ssrk::ms_convergence(sys.sde, sys.y0, std::span<const ssrk::Tableau>(tabs),
                                              h, 1.0, 3000, 20240601, o);
        check_orders(c, res, {1.09, 2.03, 2.04}, 0.25);
        const double rms = res[2].rms_errors.back();
        const double exact = exact_rms_error(tabs[2], 1.0, sys.y0, h.back(), 32);
        c.detail << "; SSRK rms(2^-5) " << num(rms) << " +- " << num(res[2].rms_stderr.back(), 2)
                 << " (exact " << num(exact) << ")";
        c.require(rms >= 1e-4 && rms <= 1e-3, "SSRK rms(2^-5) = " + num(rms) + " outside [1e-4, 1e-3]");
      });

  run("double-well convergence: orders 1.12 / 2.11 / 1.99 +- 0.3", [](Criterion& c) {
    const auto sys = ssrk::double_well(1.0, 1.0, 1.0, 0.0);
    const std::vector<ssrk::Tableau> tabs = {builtin(Builtin::euler_maruyama),
                                             builtin(Builtin::srk_alpha1, {0.5}),
                                             builtin(Builtin::ssrk_alpha1, {0.5})};
    ssrk::ConvergenceOptions o;
    o.reference_h = 0x1.0p-12;
    const auto res = ssrk::ms_convergence(sys.sde, sys.y0, std::span<const ssrk::Tableau>(tabs),
                                          dyadic_ladder(2, 6), 1.0, 3000, 20240602, o);
    check_orders(c, res, {1.12, 2.11, 1.99}, 0.3);
    for (const auto& r : res) c.require(r.failed_paths == 0, r.scheme + " had failed paths");
  });

  run("energy growth: SSRK-0.5 slope within 3 SE of 1/2 + C(0.1), b1-root slope within 3 SE of 1/2",
      [](Criterion& c) {
        const auto sys = ssrk::harmonic_oscillator(1.0, 0.0, 0.0);
        const double h = 0.1, T = 1000.0;
        const double want = 0.5 + ssrk::drift_constant(DriftConstantKind::c_ssrk05, h);
        const auto ss = builtin(Builtin::ssrk_alpha1, {0.5});
        const auto sb = builtin(Builtin::ssrk_alpha1_b1, {0.5, kB1Root});
        const auto a = ssrk::energy_growth(sys.sde, sys.y0, sys.energy, ss, h, T, 2000, 20240603);
        const auto b = ssrk::energy_growth(sys.sde, sys.y0, sys.energy, sb, h, T, 2000, 20240604);
        c.detail << ": SSRK-0.5 " << num(a.fitted_slope, 5) << " +- " << num(a.slope_stderr, 2)
                 << " vs " << num(want, 6) << "; b1 root " << num(b.fitted_slope, 5) << " +- "
                 << num(b.slope_stderr, 2) << " vs 0.5";
        c.require(std::abs(a.fitted_slope - want) <= 3 * a.slope_stderr, "SSRK-0.5 slope");
        c.require(std::abs(b.fitted_slope - 0.5) <= 3 * b.slope_stderr, "b1-root slope");
      });

  run("second-moment oracle: slope = sigma^2 (1/2 + C), alpha1 = 1/2 reduction, 97-point argmin",
      [](Criterion& c) {
        const auto ss = builtin(Builtin::ssrk_alpha1, {0.5});
        double worst_oracle = 0.0, worst_red = 0.0;
        for (double sigma : {1.0, 0.5}) {
          for (double h : {0.05, 0.1, 0.2}) {
            const double want =
                sigma * sigma * (0.5 + ssrk::drift_constant(DriftConstantKind::c_ssrk05, h));
            worst_oracle = std::max(worst_oracle, std::abs(ssrk::moment_slope_oracle(ss, sigma, h) - want));
          }
        }
        for (int j = 1; j <= 99; ++j) {
          const double h = 0.01 * j;
          worst_red = std::max(worst_red,
                               std::abs(ssrk::drift_constant(DriftConstantKind::c_alpha1, h, {0.5}) -
                                        ssrk::drift_constant(DriftConstantKind::c_ssrk05, h)));
        }
        c.require(worst_oracle <= 1e-10, "oracle mismatch " + num(worst_oracle));
        c.require(worst_red <= 1e-12, "alpha1 = 1/2 mismatch " + num(worst_red));
        for (int j = 1; j <= 9; ++j) {
          const double h = 0.1 * j;
          double best = 0.0, best_val = 1e300;
          for (int k = 1; k <= 97; ++k) {
            const double a = k / 98.0;
            const double v = std::abs(ssrk::drift_constant(DriftConstantKind::c_alpha1, h, {a}));
            if (v < best_val) {
              best_val = v;
              best = a;
            }
          }
          c.require(best == 0.5, "argmin at h = " + num(h) + " is " + num(best));
        }
        c.detail << ": oracle error " << num(worst_oracle, 2) << ", reduction error "
                 << num(worst_red, 2) << ", argmin 0.5 at h = 0.1 ... 0.9";
      });

  run("symplecticity: R^T J R = J, double-well Jacobian, Euler det R = 1 + h^2", [](Criterion& c) {
    const Eigen::Matrix2d J = ssrk::symplectic_J(1);
    const auto osc = ssrk::harmonic_oscillator(1.0, 0.0, 0.0);
    const auto ss = builtin(Builtin::ssrk_alpha1, {0.5});
    const auto eu = builtin(Builtin::euler_maruyama);
    double worst_lin = 0.0, worst_det = 0.0;
    for (double h : {0.1, 0.5, 1.0}) {
      for (const auto& t : {ss, builtin(Builtin::ssrk_alpha1_b1, {0.5, kB1Root})}) {
        const auto map = ssrk::one_step_affine_map(osc.sde, t, h);
        worst_lin = std::max(worst_lin, (map.R.transpose() * J * map.R - J).cwiseAbs().maxCoeff());
      }
      const auto em = ssrk::one_step_affine_map(osc.sde, eu, h);
      worst_det = std::max(worst_det, std::abs(std::abs(em.R.determinant() - 1.0) - h * h));
    }
    c.require(worst_lin < 1e-12, "linear map defect " + num(worst_lin));
    c.require(worst_det < 1e-14, "euler determinant defect " + num(worst_det));

    const auto dw = ssrk::double_well(1.0, 1.0, 0.0, 0.0);
    ssrk::SolverConfig cfg;
    cfg.tol = 1e-12;
    ssrk::Stepper<2> stepper(dw.sde, ss, cfg);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    const double eps = 1e-5, h = 0.1;
    double worst_fd = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const V2 y(u(rng), u(rng));
      const ssrk::IncrementPair inc[2] = {{u(rng) * 0.3, u(rng) * 0.03}, {u(rng) * 0.3, u(rng) * 0.03}};
      Eigen::Matrix2d G;
      for (int k = 0; k < 2; ++k) {
        V2 e = V2::Zero();
        e(k) = eps;
        G.col(k) = (stepper.step(0.0, y + e, h, inc) - stepper.step(0.0, y - e, h, inc)) / (2 * eps);
      }
      worst_fd = std::max(worst_fd, (G.transpose() * J * G - J).cwiseAbs().maxCoeff());
    }
    c.require(worst_fd < 1e-6, "double-well Jacobian defect " + num(worst_fd));
    c.detail << ": linear " << num(worst_lin, 2) << ", double well " << num(worst_fd, 2)
             << ", euler |det - 1| - h^2 " << num(worst_det, 2);
  });

  run("noise: one-million-sample moments within 3 SE, aggregation associative to 1e-12",
      [](Criterion& c) {
        c.detail << ": ";
        const double h = 0.01;
        check_moments(c, ssrk::sample_path(1, h, 1000000, 20240605).data(), h, "sampled");
        const std::size_t K = 8;
        const auto fine = ssrk::sample_path(1, h / K, 1000000 * K, 20240606);
        check_moments(c, ssrk::coarsen(fine, K).data(), h, "aggregated");

        const auto path = ssrk::sample_path(2, 0x1.0p-10, 1024, 20240607);
        double worst = 0.0;
        for (std::size_t K1 : {2u, 4u, 8u}) {
          for (std::size_t K2 : {2u, 4u, 16u}) {
            const auto direct = ssrk::coarsen(path, K1 * K2);
            const auto nested = ssrk::coarsen(ssrk::coarsen(path, K1), K2);
            for (std::size_t r = 0; r < 2; ++r) {
              for (std::size_t k = 0; k < direct.n_fine(); ++k) {
                const auto& a = direct.pair(r, k);
                const auto& b = nested.pair(r, k);
                const double sI = std::max(std::abs(a.I), std::sqrt(direct.h_fine()));
                const double sJ = std::max(std::abs(a.I0), std::pow(direct.h_fine(), 1.5));
                worst = std::max({worst, std::abs(a.I - b.I) / sI, std::abs(a.I0 - b.I0) / sJ});
              }
            }
          }
        }
        c.require(worst <= 1e-12, "associativity defect " + num(worst));
        c.detail << "associativity " << num(worst, 2);
      });

  std::printf("%d criteria failed\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
