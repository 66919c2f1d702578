#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <string_view>
#include <utility>
#include <vector>

#include "ssrk/errors.hpp"

namespace ssrk {

enum class SdeStructure { generic, hamiltonian, second_order_hamiltonian };

inline std::string_view to_string(SdeStructure s) {
  switch (s) {
    case SdeStructure::generic: return "generic";
    case SdeStructure::hamiltonian: return "hamiltonian";
    case SdeStructure::second_order_hamiltonian: return "second_order_hamiltonian";
  }
  return "unknown";
}

/// 2N, or Dynamic when N is Dynamic.
constexpr int doubled_dim(int n) { return n == Eigen::Dynamic ? Eigen::Dynamic : 2 * n; }

/**
 * dX = f(t, X) dt + sum_r g_r(t) dW_r  (Ito; additive noise).
 *
 * The diffusion callback takes only (t, r), so state dependence of the noise cannot be
 * expressed. Dim fixes the state size at compile time; Eigen::Dynamic is allowed.
 */
template <int Dim = Eigen::Dynamic>
class AdditiveSde {
 public:
  using State = Eigen::Matrix<double, Dim, 1>;
  using Drift = std::function<State(double, const State&)>;
  using Diffusion = std::function<State(double, std::size_t)>;

  AdditiveSde(std::size_t dim, std::size_t m, Drift drift, Diffusion diffusion,
              SdeStructure structure = SdeStructure::generic)
      : dim_(dim), m_(m), drift_(std::move(drift)), diffusion_(std::move(diffusion)),
        structure_(structure) {
    if (dim_ < 1) throw StructuralError("SDE dimension must be positive");
    if (Dim != Eigen::Dynamic && dim_ != static_cast<std::size_t>(Dim))
      throw StructuralError("SDE dimension does not match the compile-time state size");
    if (m_ < 1) throw StructuralError("SDE needs at least one noise channel");
    if (!drift_ || !diffusion_) throw StructuralError("SDE drift and diffusion must be set");
    if (structure_ != SdeStructure::generic && dim_ % 2 != 0)
      throw StructuralError("Hamiltonian SDE must have even dimension");
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t channels() const noexcept { return m_; }
  SdeStructure structure() const noexcept { return structure_; }

  State drift(double t, const State& x) const { return drift_(t, x); }
  State diffusion(double t, std::size_t r) const { return diffusion_(t, r); }

 private:
  std::size_t dim_;
  std::size_t m_;
  Drift drift_;
  Diffusion diffusion_;
  SdeStructure structure_;
};

/// Expected energy along the exact solution: E[H0(t)] = intercept + expected_slope * t.
template <int Dim = Eigen::Dynamic>
struct EnergyLaw {
  using State = Eigen::Matrix<double, Dim, 1>;
  std::function<double(const State&)> H0;
  double expected_slope = 0.0;
  double intercept = 0.0;

  double expected(double t) const { return intercept + expected_slope * t; }
};

/**
 * M q'' + grad U(t, q) = sum_r sigma_r(t) dW_r / dt, recast with P = M q' as
 *   dP = -grad U(t, Q) dt + sum_r sigma_r(t) dW_r,   dQ = M^{-1} P dt.
 * State order is (P, Q).
 */
template <int N = Eigen::Dynamic>
struct SecondOrderSpec {
  using Config = Eigen::Matrix<double, N, 1>;
  using MassInv = Eigen::Matrix<double, N, N>;

  std::size_t n = 0;
  MassInv mass_inv;
  std::function<Config(double, const Config&)> grad_U;
  std::vector<std::function<Config(double)>> sigmas;
  std::function<double(double, const Config&)> potential;  // optional, for H0
};

template <int N>
AdditiveSde<doubled_dim(N)> from_second_order(const SecondOrderSpec<N>& spec) {
  using Sde = AdditiveSde<doubled_dim(N)>;
  using State = typename Sde::State;
  using Config = typename SecondOrderSpec<N>::Config;
  const auto n = static_cast<Eigen::Index>(spec.n);
  if (spec.n < 1) throw StructuralError("second-order spec: n must be positive");
  if (spec.mass_inv.rows() != n || spec.mass_inv.cols() != n)
    throw StructuralError("second-order spec: mass_inv must be n x n");
  if (!spec.grad_U) throw StructuralError("second-order spec: grad_U must be set");
  if (spec.sigmas.empty()) throw StructuralError("second-order spec: at least one sigma required");
  const double scale = std::max(1.0, spec.mass_inv.cwiseAbs().maxCoeff());
  if ((spec.mass_inv - spec.mass_inv.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw DomainError("second-order spec: mass_inv is not symmetric");
  if (std::abs(spec.mass_inv.determinant()) < 1e-300)
    throw DomainError("second-order spec: mass_inv is singular");

  auto drift = [mass_inv = spec.mass_inv, grad_U = spec.grad_U, n](double t, const State& x) {
    State out(2 * n);
    const Config p = x.head(n);
    const Config q = x.tail(n);
    out.head(n) = -grad_U(t, q);
    out.tail(n) = mass_inv * p;
    return out;
  };
  auto diffusion = [sigmas = spec.sigmas, n](double t, std::size_t r) {
    State out = State::Zero(2 * n);
    out.head(n) = sigmas[r](t);
    return out;
  };
  return Sde(spec.n * 2, spec.sigmas.size(), std::move(drift), std::move(diffusion),
             SdeStructure::second_order_hamiltonian);
}

/// Builtin test system: problem, energy law of H0 and the initial state.
struct PlanarSystem {
  AdditiveSde<2> sde;
  EnergyLaw<2> energy;
  Eigen::Vector2d y0;
};

namespace detail {

inline std::function<Eigen::Matrix<double, 1, 1>(double)> constant_sigma(double s) {
  return [s](double) { return Eigen::Matrix<double, 1, 1>::Constant(s); };
}

}  // namespace detail

/// dP = -Q dt + sigma dW, dQ = P dt; H0 = (p^2 + q^2) / 2, E[H0] grows with slope sigma^2 / 2.
inline PlanarSystem harmonic_oscillator(double sigma, double p0, double q0) {
  SecondOrderSpec<1> spec;
  spec.n = 1;
  spec.mass_inv = Eigen::Matrix<double, 1, 1>::Identity();
  spec.grad_U = [](double, const Eigen::Matrix<double, 1, 1>& q) { return q; };
  spec.sigmas = {detail::constant_sigma(sigma)};
  EnergyLaw<2> law;
  law.H0 = [](const Eigen::Vector2d& y) { return 0.5 * (y(0) * y(0) + y(1) * y(1)); };
  law.intercept = 0.5 * (p0 * p0 + q0 * q0);
  law.expected_slope = 0.5 * sigma * sigma;
  return {from_second_order(spec), std::move(law), Eigen::Vector2d(p0, q0)};
}

/// dP = (Q - Q^3) dt + sigma1 dW1 + sigma2 dW2, dQ = P dt; H0 = (p^2 - q^2)/2 + q^4/4.
inline PlanarSystem double_well(double sigma1, double sigma2, double p0, double q0) {
  SecondOrderSpec<1> spec;
  spec.n = 1;
  spec.mass_inv = Eigen::Matrix<double, 1, 1>::Identity();
  spec.grad_U = [](double, const Eigen::Matrix<double, 1, 1>& q) {
    return Eigen::Matrix<double, 1, 1>::Constant(q(0) * q(0) * q(0) - q(0));
  };
  spec.sigmas = {detail::constant_sigma(sigma1), detail::constant_sigma(sigma2)};
  EnergyLaw<2> law;
  law.H0 = [](const Eigen::Vector2d& y) {
    const double q2 = y(1) * y(1);
    return 0.5 * (y(0) * y(0) - q2) + 0.25 * q2 * q2;
  };
  law.intercept = law.H0(Eigen::Vector2d(p0, q0));
  law.expected_slope = 0.5 * (sigma1 * sigma1 + sigma2 * sigma2);
  return {from_second_order(spec), std::move(law), Eigen::Vector2d(p0, q0)};
}

/// Standard symplectic matrix J = [[0, I], [-I, 0]] of size 2n.
inline Eigen::MatrixXd symplectic_J(Eigen::Index n) {
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  J.topRightCorner(n, n).setIdentity();
  J.bottomLeftCorner(n, n) = -Eigen::MatrixXd::Identity(n, n);
  return J;
}

}  // namespace ssrk
