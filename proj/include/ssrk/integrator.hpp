#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "ssrk/errors.hpp"
#include "ssrk/noise.hpp"
#include "ssrk/sde.hpp"
#include "ssrk/tableau.hpp"

namespace ssrk {

enum class SolverMode { explicit_only, fixed_point };

inline std::string_view to_string(SolverMode m) {
  return m == SolverMode::explicit_only ? "explicit" : "fixed_point";
}

struct SolverConfig {
  SolverMode mode = SolverMode::fixed_point;
  double tol = 1e-12;  // max-norm, absolute
  std::size_t max_iters = 100;

  void validate() const {
    if (!(tol > 0.0)) throw DomainError("solver tolerance must be positive");
    if (max_iters < 1) throw DomainError("solver max_iters must be at least 1");
  }
};

inline constexpr double kMinStep = 1e-12;
inline constexpr double kDivergenceBound = 1e10;

struct StepStats {
  std::size_t steps = 0;
  std::size_t drift_evals = 0;
  std::size_t fixed_point_iterations = 0;
};

template <int Dim = Eigen::Dynamic>
struct StepInputs {
  using State = Eigen::Matrix<double, Dim, 1>;
  double t_n = 0.0;
  State y_n;
  double h = 0.0;
  std::span<const IncrementPair> incs;
};

/**
 * One-step map of an additive-noise SRK scheme bound to a problem and tableau.
 *
 * Stages are solved in order. A stage with a_ii != 0 is iterated as
 *   Y <- base_i + h a_ii f(t_n + c_i h, Y),  base_i = y_n + lower-stage and noise terms,
 * starting from base_i, until successive iterates differ by less than cfg.tol in max-norm.
 *
 * Holds a reference to the problem, which must outlive the stepper. Not thread-safe
 * (owns scratch buffers); use one stepper per thread.
 */
template <int Dim = Eigen::Dynamic>
class Stepper {
 public:
  using State = Eigen::Matrix<double, Dim, 1>;

  Stepper(const AdditiveSde<Dim>& sde, const Tableau& tableau, SolverConfig cfg = {})
      : sde_(&sde), tab_(tableau), cfg_(cfg), s_(tableau.stages()), m_(sde.channels()) {
    cfg_.validate();
    if (tab_.structure() == StageStructure::fully_implicit)
      throw StructuralError("tableau '" + tab_.name() +
                            "' is fully implicit; only lower-triangular A is supported");
    if (cfg_.mode == SolverMode::explicit_only && !tab_.is_explicit())
      throw StructuralError("explicit solver mode requires an explicit tableau, '" + tab_.name() +
                            "' has implicit stages");
    const auto d = static_cast<Eigen::Index>(sde.dim());
    Y_.assign(s_, State::Zero(d));
    F_.assign(s_, State::Zero(d));
    G_.assign(s_ * m_, State::Zero(d));
    stage_noise_.assign(s_, State::Zero(d));
    I_.resize(m_);
    J_.resize(m_);
  }

  const Tableau& tableau() const noexcept { return tab_; }
  const SolverConfig& config() const noexcept { return cfg_; }
  const StepStats& stats() const noexcept { return stats_; }

  State step(double t, const State& y, double h, std::span<const IncrementPair> incs) {
    if (!(h >= kMinStep) || !std::isfinite(h))
      throw DomainError("step size must be at least 1e-12, got " + std::to_string(h));
    if (incs.size() != m_)
      throw StructuralError("expected " + std::to_string(m_) + " increment pairs, got " +
                            std::to_string(incs.size()));
    if (static_cast<std::size_t>(y.size()) != sde_->dim())
      throw StructuralError("state dimension does not match the problem");

    const auto& A = tab_.A();
    const auto& B = tab_.B();
    const auto& D = tab_.D();
    const auto& c = tab_.c();
    const auto& c_hat = tab_.c_hat();
    const auto d = static_cast<Eigen::Index>(sde_->dim());
    const auto s = static_cast<Eigen::Index>(s_);

    for (std::size_t r = 0; r < m_; ++r) {
      I_[r] = incs[r].I;
      J_[r] = incs[r].I0 / h;
      for (std::size_t j = 0; j < s_; ++j)
        G_[r * s_ + j] = sde_->diffusion(t + c_hat(static_cast<Eigen::Index>(j)) * h, r);
    }

    for (Eigen::Index i = 0; i < s; ++i) {
      State& noise = stage_noise_[static_cast<std::size_t>(i)];
      noise.setZero(d);
      for (std::size_t r = 0; r < m_; ++r) {
        for (Eigen::Index j = 0; j < s; ++j) {
          const double w = B(i, j) * I_[r] + D(i, j) * J_[r];
          if (w != 0.0) noise += w * G_[r * s_ + static_cast<std::size_t>(j)];
        }
      }
    }

    for (Eigen::Index i = 0; i < s; ++i) {
      const auto si = static_cast<std::size_t>(i);
      State base = y + stage_noise_[si];
      for (Eigen::Index j = 0; j < i; ++j)
        if (A(i, j) != 0.0) base += (h * A(i, j)) * F_[static_cast<std::size_t>(j)];
      const double ti = t + c(i) * h;
      const double diag = h * A(i, i);
      if (diag == 0.0) {
        Y_[si] = base;
      } else {
        State& Yi = Y_[si];
        Yi = base;
        double residual = 0.0;
        bool converged = false;
        for (std::size_t it = 0; it < cfg_.max_iters; ++it) {
          State next = base + diag * sde_->drift(ti, Yi);
          ++stats_.drift_evals;
          ++stats_.fixed_point_iterations;
          residual = (next - Yi).cwiseAbs().maxCoeff();
          Yi = next;
          if (!std::isfinite(residual) || Yi.cwiseAbs().maxCoeff() > kDivergenceBound)
            throw ConvergenceError(si, residual);
          if (residual < cfg_.tol) {
            converged = true;
            break;
          }
        }
        if (!converged) throw ConvergenceError(si, residual);
      }
      F_[si] = sde_->drift(ti, Y_[si]);
      ++stats_.drift_evals;
    }

    const auto& alpha = tab_.alpha();
    const auto& beta = tab_.beta();
    const auto& gamma = tab_.gamma();
    State out = y;
    for (Eigen::Index i = 0; i < s; ++i)
      if (alpha(i) != 0.0) out += (h * alpha(i)) * F_[static_cast<std::size_t>(i)];
    for (std::size_t r = 0; r < m_; ++r) {
      for (Eigen::Index i = 0; i < s; ++i) {
        const double w = beta(i) * I_[r] + gamma(i) * J_[r];
        if (w != 0.0) out += w * G_[r * s_ + static_cast<std::size_t>(i)];
      }
    }
    ++stats_.steps;
    return out;
  }

  State step(const StepInputs<Dim>& in) { return step(in.t_n, in.y_n, in.h, in.incs); }

 private:
  const AdditiveSde<Dim>* sde_;
  Tableau tab_;
  SolverConfig cfg_;
  std::size_t s_;
  std::size_t m_;
  std::vector<State> Y_, F_, G_, stage_noise_;
  std::vector<double> I_, J_;
  StepStats stats_;
};

template <int Dim>
typename AdditiveSde<Dim>::State step(const AdditiveSde<Dim>& sde, const Tableau& tableau,
                                      const StepInputs<Dim>& in, const SolverConfig& cfg = {}) {
  Stepper<Dim> stepper(sde, tableau, cfg);
  return stepper.step(in);
}

/**
 * Advances n_steps coarse steps of size h = coarse_factor * path.h_fine(), drawing each
 * step's increments by aggregating the fine path. observer(step_index, t, y) is called
 * for the initial state (index 0) and after every step.
 */
template <int Dim, class Observer>
typename Stepper<Dim>::State integrate(Stepper<Dim>& stepper,
                                       const typename Stepper<Dim>::State& y0, double t0,
                                       double h, std::size_t n_steps, const NoisePath& path,
                                       std::size_t coarse_factor, Observer&& observer) {
  if (coarse_factor < 1) throw DomainError("coarse factor must be at least 1");
  if (n_steps > 0 && coarse_factor * n_steps > path.n_fine())
    throw DomainError("trajectory needs " + std::to_string(coarse_factor * n_steps) +
                      " fine steps but the path has " + std::to_string(path.n_fine()));
  const double h_path = path.h_fine() * static_cast<double>(coarse_factor);
  if (std::abs(h - h_path) > 1e-12 * h)
    throw DomainError("step h = " + std::to_string(h) +
                      " does not equal coarse_factor * h_fine = " + std::to_string(h_path));
  const std::size_t m = path.channels();
  std::vector<IncrementPair> incs(m);
  typename Stepper<Dim>::State y = y0;
  observer(std::size_t{0}, t0, y);
  for (std::size_t n = 0; n < n_steps; ++n) {
    for (std::size_t r = 0; r < m; ++r)
      incs[r] = aggregate_range(path, r, n * coarse_factor, coarse_factor);
    const double t = t0 + static_cast<double>(n) * h;
    try {
      y = stepper.step(t, y, h, incs);
    } catch (const ConvergenceError& e) {
      throw e.at_step(n);
    }
    observer(n + 1, t + h, y);
  }
  return y;
}

/// All states y_0 ... y_{n_steps} of a trajectory driven by `path`.
template <int Dim>
std::vector<typename AdditiveSde<Dim>::State> run_trajectory(
    const AdditiveSde<Dim>& sde, const Tableau& tableau,
    const typename AdditiveSde<Dim>::State& y0, double t0, double h, std::size_t n_steps,
    const NoisePath& path, std::size_t coarse_factor, const SolverConfig& cfg = {}) {
  if (path.channels() != sde.channels())
    throw StructuralError("noise path has " + std::to_string(path.channels()) +
                          " channels, problem needs " + std::to_string(sde.channels()));
  Stepper<Dim> stepper(sde, tableau, cfg);
  std::vector<typename AdditiveSde<Dim>::State> states;
  states.reserve(n_steps + 1);
  integrate(stepper, y0, t0, h, n_steps, path, coarse_factor,
            [&](std::size_t, double, const auto& y) { states.push_back(y); });
  return states;
}

// ---------------------------------------------------------------------------
// Exact one-step map for linear drift x -> L x and constant diffusion.

struct AffineStepMap {
  Eigen::MatrixXd R;                    // y_{n+1} = R y_n + sum_r (u_r I_r + v_r I_r0 / h)
  std::vector<Eigen::VectorXd> u;       // gain on I_r
  std::vector<Eigen::VectorXd> v;       // gain on I_r0 / h
};

inline AffineStepMap one_step_affine_map(const Eigen::MatrixXd& L,
                                         const std::vector<Eigen::VectorXd>& g,
                                         const Tableau& tab, double h) {
  const Eigen::Index d = L.rows();
  if (L.cols() != d || d < 1) throw StructuralError("linear drift matrix must be square");
  for (const auto& col : g)
    if (col.size() != d) throw StructuralError("diffusion column length must match L");
  if (!(h > 0.0)) throw DomainError("step size must be positive");
  const auto s = static_cast<Eigen::Index>(tab.stages());
  const Eigen::MatrixXd Id = Eigen::MatrixXd::Identity(d, d);

  Eigen::MatrixXd M = Eigen::MatrixXd::Identity(s * d, s * d);
  for (Eigen::Index i = 0; i < s; ++i)
    for (Eigen::Index j = 0; j < s; ++j)
      M.block(i * d, j * d, d, d) -= h * tab.A()(i, j) * L;
  const Eigen::FullPivLU<Eigen::MatrixXd> lu(M);
  if (!lu.isInvertible()) throw SingularityError(h);

  // (alpha^T (x) h L) applied to a stacked stage vector
  auto update_drift = [&](const Eigen::MatrixXd& stacked) {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, stacked.cols());
    for (Eigen::Index i = 0; i < s; ++i)
      acc += h * tab.alpha()(i) * (L * stacked.middleRows(i * d, d));
    return acc;
  };

  Eigen::MatrixXd E(s * d, d);
  for (Eigen::Index i = 0; i < s; ++i) E.middleRows(i * d, d) = Id;

  AffineStepMap map;
  map.R = Id + update_drift(lu.solve(E));
  for (const auto& gr : g) {
    Eigen::VectorXd rhs_b(s * d), rhs_d(s * d);
    for (Eigen::Index i = 0; i < s; ++i) {
      rhs_b.segment(i * d, d) = tab.B().row(i).sum() * gr;
      rhs_d.segment(i * d, d) = tab.D().row(i).sum() * gr;
    }
    map.u.push_back(update_drift(lu.solve(rhs_b)) + tab.beta().sum() * gr);
    map.v.push_back(update_drift(lu.solve(rhs_d)) + tab.gamma().sum() * gr);
  }
  return map;
}

/**
 * Same map for a problem object whose drift is linear and time-independent and whose
 * diffusion is constant; L is recovered column-by-column from drift(0, e_k).
 */
template <int Dim>
AffineStepMap one_step_affine_map(const AdditiveSde<Dim>& sde, const Tableau& tab, double h) {
  using State = typename AdditiveSde<Dim>::State;
  const auto d = static_cast<Eigen::Index>(sde.dim());
  const State zero = State::Zero(d);
  if (sde.drift(0.0, zero).cwiseAbs().maxCoeff() != 0.0)
    throw DomainError("affine map requires drift of the form x -> L x");
  Eigen::MatrixXd L(d, d);
  for (Eigen::Index k = 0; k < d; ++k) {
    State ek = State::Zero(d);
    ek(k) = 1.0;
    L.col(k) = sde.drift(0.0, ek);
  }
  State probe(d);
  for (Eigen::Index k = 0; k < d; ++k) probe(k) = 0.5 + 0.25 * static_cast<double>(k);
  const double scale = std::max(1.0, L.cwiseAbs().maxCoeff());
  const Eigen::VectorXd lin = L * Eigen::VectorXd(probe);
  for (double t : {0.0, 0.37, 1.0}) {
    if ((Eigen::VectorXd(sde.drift(t, probe)) - lin).cwiseAbs().maxCoeff() > 1e-12 * scale)
      throw DomainError("affine map requires linear time-independent drift");
  }
  std::vector<Eigen::VectorXd> g;
  for (std::size_t r = 0; r < sde.channels(); ++r) {
    Eigen::VectorXd g0 = sde.diffusion(0.0, r);
    for (Eigen::Index j = 0; j < tab.c_hat().size(); ++j) {
      if ((Eigen::VectorXd(sde.diffusion(tab.c_hat()(j) * h, r)) - g0).cwiseAbs().maxCoeff() > 0.0)
        throw DomainError("affine map requires constant diffusion");
    }
    g.push_back(std::move(g0));
  }
  return one_step_affine_map(L, g, tab, h);
}

}  // namespace ssrk
