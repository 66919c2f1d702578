#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <charconv>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ssrk/errors.hpp"

namespace ssrk {

/// Stage coupling pattern of the drift matrix A.
enum class StageStructure {
  explicit_stages,      ///< A strictly lower triangular
  diagonally_implicit,  ///< A lower triangular with at least one nonzero diagonal entry
  fully_implicit,       ///< entries above the diagonal
};

inline std::string_view to_string(StageStructure s) {
  switch (s) {
    case StageStructure::explicit_stages: return "explicit";
    case StageStructure::diagonally_implicit: return "diagonally_implicit";
    case StageStructure::fully_implicit: return "fully_implicit";
  }
  return "unknown";
}

/**
 * Coefficients of an s-stage stochastic Runge-Kutta scheme for additive noise:
 *
 *   Y_i     = y_n + h sum_j a_ij f(t_n + c_j h, Y_j)
 *                 + sum_r I_r sum_j b_ij g_r(t_n + chat_j h) + sum_r (I_r0 / h) sum_j d_ij g_r(...)
 *   y_{n+1} = y_n + h sum_i alpha_i f(t_n + c_i h, Y_i)
 *                 + sum_r I_r sum_i beta_i g_r(t_n + chat_i h) + sum_r (I_r0 / h) sum_i gamma_i g_r(...)
 *
 * B and D multiply time-only diffusion values, so they never make a stage implicit;
 * only A determines the stage structure. Values are immutable after construction.
 */
class Tableau {
 public:
  Tableau(std::string name, Eigen::MatrixXd A, Eigen::MatrixXd B, Eigen::MatrixXd D,
          Eigen::VectorXd alpha, Eigen::VectorXd beta, Eigen::VectorXd gamma, Eigen::VectorXd c,
          Eigen::VectorXd c_hat)
      : name_(std::move(name)),
        A_(std::move(A)),
        B_(std::move(B)),
        D_(std::move(D)),
        alpha_(std::move(alpha)),
        beta_(std::move(beta)),
        gamma_(std::move(gamma)),
        c_(std::move(c)),
        c_hat_(std::move(c_hat)) {
    const auto s = A_.rows();
    if (s < 1) throw StructuralError("tableau '" + name_ + "': stage count must be positive");
    auto square = [&](const Eigen::MatrixXd& m, const char* what) {
      if (m.rows() != s || m.cols() != s)
        throw StructuralError("tableau '" + name_ + "': " + what + " must be " +
                              std::to_string(s) + "x" + std::to_string(s));
    };
    auto vec = [&](const Eigen::VectorXd& v, const char* what) {
      if (v.size() != s)
        throw StructuralError("tableau '" + name_ + "': " + what + " must have length " +
                              std::to_string(s));
    };
    square(A_, "A");
    square(B_, "B");
    square(D_, "D");
    vec(alpha_, "alpha");
    vec(beta_, "beta");
    vec(gamma_, "gamma");
    vec(c_, "c");
    vec(c_hat_, "c_hat");
    auto finite = [&](const auto& m, const char* what) {
      if (!m.allFinite())
        throw StructuralError("tableau '" + name_ + "': " + what + " has non-finite entries");
    };
    finite(A_, "A");
    finite(B_, "B");
    finite(D_, "D");
    finite(alpha_, "alpha");
    finite(beta_, "beta");
    finite(gamma_, "gamma");
    finite(c_, "c");
    finite(c_hat_, "c_hat");

    structure_ = StageStructure::explicit_stages;
    for (Eigen::Index i = 0; i < s; ++i) {
      for (Eigen::Index j = i + 1; j < s; ++j)
        if (A_(i, j) != 0.0) structure_ = StageStructure::fully_implicit;
    }
    if (structure_ != StageStructure::fully_implicit) {
      for (Eigen::Index i = 0; i < s; ++i)
        if (A_(i, i) != 0.0) structure_ = StageStructure::diagonally_implicit;
    }
  }

  const std::string& name() const noexcept { return name_; }
  std::size_t stages() const noexcept { return static_cast<std::size_t>(A_.rows()); }

  const Eigen::MatrixXd& A() const noexcept { return A_; }
  const Eigen::MatrixXd& B() const noexcept { return B_; }
  const Eigen::MatrixXd& D() const noexcept { return D_; }
  const Eigen::VectorXd& alpha() const noexcept { return alpha_; }
  const Eigen::VectorXd& beta() const noexcept { return beta_; }
  const Eigen::VectorXd& gamma() const noexcept { return gamma_; }
  const Eigen::VectorXd& c() const noexcept { return c_; }
  const Eigen::VectorXd& c_hat() const noexcept { return c_hat_; }

  StageStructure structure() const noexcept { return structure_; }
  bool is_explicit() const noexcept { return structure_ == StageStructure::explicit_stages; }

  /// A copy carrying a different identifier; coefficients are shared by value.
  Tableau renamed(std::string name) const {
    Tableau t = *this;
    t.name_ = std::move(name);
    return t;
  }

 private:
  std::string name_;
  Eigen::MatrixXd A_, B_, D_;
  Eigen::VectorXd alpha_, beta_, gamma_, c_, c_hat_;
  StageStructure structure_;
};

// ---------------------------------------------------------------------------
// Condition checks

enum class OrderTarget { ms_1_0, ms_1_5, ms_2_0_second_order };

enum class Verdict {
  below_order_1,
  order_1_0,
  order_1_5,
  order_2_0_second_order_systems,
  not_symplectic,
  symplectic,
};

inline std::string_view to_string(OrderTarget t) {
  switch (t) {
    case OrderTarget::ms_1_0: return "ms_1_0";
    case OrderTarget::ms_1_5: return "ms_1_5";
    case OrderTarget::ms_2_0_second_order: return "ms_2_0_second_order";
  }
  return "unknown";
}

inline OrderTarget parse_order_target(std::string_view s) {
  if (s == "ms_1_0") return OrderTarget::ms_1_0;
  if (s == "ms_1_5") return OrderTarget::ms_1_5;
  if (s == "ms_2_0_second_order") return OrderTarget::ms_2_0_second_order;
  throw DomainError("unknown order target '" + std::string(s) +
                    "' (expected ms_1_0, ms_1_5 or ms_2_0_second_order)");
}

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::below_order_1: return "below_order_1";
    case Verdict::order_1_0: return "order_1_0";
    case Verdict::order_1_5: return "order_1_5";
    case Verdict::order_2_0_second_order_systems: return "order_2_0_second_order_systems";
    case Verdict::not_symplectic: return "not_symplectic";
    case Verdict::symplectic: return "symplectic";
  }
  return "unknown";
}

struct ConditionEntry {
  std::string id;
  std::string identity;  // human-readable form of the checked identity
  double residual = 0.0;  // max-abs residual of the identity
  bool satisfied = false;
  bool required = false;  // part of the condition set of the requested target
};

struct ConditionReport {
  std::vector<ConditionEntry> entries;
  double tolerance = 0.0;
  double max_abs_residual = 0.0;  // over required entries
  Verdict verdict = Verdict::below_order_1;

  const ConditionEntry* find(std::string_view id) const {
    for (const auto& e : entries)
      if (e.id == id) return &e;
    return nullptr;
  }

  std::vector<std::string> failing() const {
    std::vector<std::string> out;
    for (const auto& e : entries)
      if (e.required && !e.satisfied) out.push_back(e.id);
    return out;
  }
};

inline constexpr double kDefaultConditionTol = 1e-12;

/// True if the verdict of an order report reaches the requested target.
inline bool meets(const ConditionReport& r, OrderTarget target) {
  switch (target) {
    case OrderTarget::ms_1_0:
      return r.verdict == Verdict::order_1_0 || r.verdict == Verdict::order_1_5 ||
             r.verdict == Verdict::order_2_0_second_order_systems;
    case OrderTarget::ms_1_5: return r.verdict == Verdict::order_1_5;
    case OrderTarget::ms_2_0_second_order:
      return r.verdict == Verdict::order_2_0_second_order_systems;
  }
  return false;
}

/**
 * Evaluates the ten coefficient identities for mean-square order 1.0 / 1.5 of an
 * additive-noise SRK scheme. All ten entries are always reported; the target selects
 * which of them decide the verdict:
 *   ms_1_0               conditions 1-4
 *   ms_1_5               conditions 1-10
 *   ms_2_0_second_order  conditions 1-9 (the tree behind condition 10 has a vanishing
 *                        elementary differential for d^2 q = -grad U + noise systems)
 */
inline ConditionReport check_order_conditions(const Tableau& t, OrderTarget target,
                                              double tol = kDefaultConditionTol) {
  if (!(tol > 0.0)) throw DomainError("condition tolerance must be positive");
  const auto s = static_cast<Eigen::Index>(t.stages());
  const Eigen::VectorXd e = Eigen::VectorXd::Ones(s);
  const Eigen::VectorXd Ae = t.A() * e;
  const Eigen::VectorXd Be = t.B() * e;
  const Eigen::VectorXd De = t.D() * e;

  const double quad =
      t.alpha().dot((Be.array().square() + De.array().square() / 3.0 + Be.array() * De.array())
                        .matrix());

  // clang-format off
  const std::pair<const char*, double> raw[] = {
      {"c = Ae",                                   (t.c() - Ae).cwiseAbs().maxCoeff()},
      {"alpha^T e = 1",                            t.alpha().sum() - 1.0},
      {"beta^T e = 1",                             t.beta().sum() - 1.0},
      {"gamma^T e = 0",                            t.gamma().sum()},
      {"alpha^T A e = 1/2",                        t.alpha().dot(Ae) - 0.5},
      {"alpha^T B e = 0",                          t.alpha().dot(Be)},
      {"alpha^T D e = 1",                          t.alpha().dot(De) - 1.0},
      {"beta^T chat = 1",                          t.beta().dot(t.c_hat()) - 1.0},
      {"gamma^T chat = -1",                        t.gamma().dot(t.c_hat()) + 1.0},
      {"alpha^T((Be)^2 + (De)^2/3 + Be.De) = 1/2", quad - 0.5},
  };
  // clang-format on

  std::size_t required_count = 4;
  if (target == OrderTarget::ms_1_5) required_count = 10;
  if (target == OrderTarget::ms_2_0_second_order) required_count = 9;

  ConditionReport report;
  report.tolerance = tol;
  for (std::size_t k = 0; k < std::size(raw); ++k) {
    ConditionEntry entry;
    entry.id = std::to_string(k + 1);
    entry.identity = raw[k].first;
    entry.residual = std::abs(raw[k].second);
    entry.satisfied = entry.residual <= tol;
    entry.required = k < required_count;
    if (entry.required) report.max_abs_residual = std::max(report.max_abs_residual, entry.residual);
    report.entries.push_back(std::move(entry));
  }

  auto all_ok = [&](std::size_t n) {
    for (std::size_t k = 0; k < n; ++k)
      if (!report.entries[k].satisfied) return false;
    return true;
  };
  if (!all_ok(4)) {
    report.verdict = Verdict::below_order_1;
  } else if (target == OrderTarget::ms_1_5 && all_ok(10)) {
    report.verdict = Verdict::order_1_5;
  } else if (target == OrderTarget::ms_2_0_second_order && all_ok(9)) {
    report.verdict = Verdict::order_2_0_second_order_systems;
  } else {
    report.verdict = Verdict::order_1_0;
  }
  return report;
}

/// Symplecticity of the A/alpha block: M_ij = alpha_i a_ij + alpha_j a_ji - alpha_i alpha_j = 0.
inline ConditionReport check_symplectic(const Tableau& t, double tol = kDefaultConditionTol) {
  if (!(tol > 0.0)) throw DomainError("condition tolerance must be positive");
  const auto s = static_cast<Eigen::Index>(t.stages());
  const auto& A = t.A();
  const auto& a = t.alpha();
  ConditionReport report;
  report.tolerance = tol;
  for (Eigen::Index i = 0; i < s; ++i) {
    for (Eigen::Index j = 0; j < s; ++j) {
      ConditionEntry entry;
      entry.id = "M(" + std::to_string(i + 1) + "," + std::to_string(j + 1) + ")";
      entry.identity = "alpha_i a_ij + alpha_j a_ji - alpha_i alpha_j = 0";
      entry.residual = std::abs(a(i) * A(i, j) + a(j) * A(j, i) - a(i) * a(j));
      entry.satisfied = entry.residual <= tol;
      entry.required = true;
      report.max_abs_residual = std::max(report.max_abs_residual, entry.residual);
      report.entries.push_back(std::move(entry));
    }
  }
  report.verdict =
      report.max_abs_residual <= tol ? Verdict::symplectic : Verdict::not_symplectic;
  return report;
}

// ---------------------------------------------------------------------------
// Builtin schemes

enum class Builtin { euler_maruyama, midpoint, srk_alpha1, ssrk_alpha1, ssrk_alpha1_b1 };

struct BuiltinInfo {
  Builtin id;
  std::string_view name;
  std::string_view params;       // parameter names, comma separated
  std::string_view domain;       // admissible parameter region
  std::vector<double> sample;    // representative parameters
  std::string_view description;
};

inline const std::vector<BuiltinInfo>& builtin_catalog() {
  static const std::vector<BuiltinInfo> catalog = {
      {Builtin::euler_maruyama, "euler_maruyama", "", "none", {}, "1-stage Euler-Maruyama"},
      {Builtin::midpoint, "midpoint", "", "none", {}, "1-stage implicit stochastic midpoint"},
      {Builtin::srk_alpha1, "srk_alpha1", "alpha1", "alpha1 in (0,1)", {0.5},
       "2-stage explicit SRK family"},
      {Builtin::ssrk_alpha1, "ssrk_alpha1", "alpha1", "alpha1 in (0,1)", {0.5},
       "2-stage diagonally implicit symplectic SRK family"},
      {Builtin::ssrk_alpha1_b1, "ssrk_alpha1_b1", "alpha1,b1",
       "alpha1 in (0,1), |b1| < (2/3) sqrt((1-alpha1)/alpha1)", {0.5, (-2.0 + std::sqrt(6.0)) / 6.0},
       "2-stage diagonally implicit symplectic SRK family with free B weight"},
  };
  return catalog;
}

inline Builtin parse_builtin(std::string_view name) {
  for (const auto& info : builtin_catalog())
    if (info.name == name) return info.id;
  throw DomainError("unknown builtin scheme '" + std::string(name) + "'");
}

inline std::string_view to_string(Builtin b) {
  for (const auto& info : builtin_catalog())
    if (info.id == b) return info.name;
  return "unknown";
}

namespace detail {

inline std::string format_params(std::string_view name, std::span<const double> params) {
  std::string out(name);
  if (params.empty()) return out;
  out += '(';
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (i) out += ',';
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, params[i]);
    out.append(buf, res.ptr);
  }
  out += ')';
  return out;
}

inline void expect_params(std::string_view name, std::span<const double> params, std::size_t n) {
  if (params.size() != n)
    throw DomainError(std::string(name) + " expects " + std::to_string(n) + " parameter(s), got " +
                      std::to_string(params.size()));
  for (double p : params)
    if (!std::isfinite(p)) throw DomainError(std::string(name) + ": parameters must be finite");
}

inline void check_alpha1(std::string_view name, double a) {
  if (!(a > 0.0 && a < 1.0))
    throw DomainError(std::string(name) + ": alpha1 = " + std::to_string(a) +
                      " violates 0 < alpha1 < 1");
}

inline Eigen::MatrixXd first_column(double top, double bottom) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(2, 2);
  m(0, 0) = top;
  m(1, 0) = bottom;
  return m;
}

inline Eigen::VectorXd v2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

inline Eigen::VectorXd v1(double a) { return Eigen::VectorXd::Constant(1, a); }
inline Eigen::MatrixXd m1(double a) { return Eigen::MatrixXd::Constant(1, 1, a); }

}  // namespace detail

/**
 * Builds a builtin scheme.
 *
 * - euler_maruyama: s = 1, A = B = D = 0, alpha = beta = 1, gamma = 0, c = chat = 0.
 * - midpoint: s = 1, a11 = b11 = 1/2, alpha = beta = 1, gamma = 0, c = chat = 1/2.
 * - srk_alpha1 [alpha1]: explicit 2-stage family, 0 < alpha1 < 1.
 * - ssrk_alpha1 [alpha1]: diagonally implicit symplectic family on the 2-stage order-2
 *   symplectic RK base, 0 < alpha1 < 1.
 * - ssrk_alpha1_b1 [alpha1, b1]: two-parameter symplectic family,
 *   |b1| < (2/3) sqrt((1 - alpha1) / alpha1).
 */
inline Tableau make_builtin(Builtin which, std::span<const double> params = {}) {
  using namespace detail;
  const auto name = to_string(which);
  switch (which) {
    case Builtin::euler_maruyama: {
      expect_params(name, params, 0);
      return Tableau(std::string(name), m1(0.0), m1(0.0), m1(0.0), v1(1.0), v1(1.0), v1(0.0),
                     v1(0.0), v1(0.0));
    }
    case Builtin::midpoint: {
      expect_params(name, params, 0);
      return Tableau(std::string(name), m1(0.5), m1(0.5), m1(0.0), v1(1.0), v1(1.0), v1(0.0),
                     v1(0.5), v1(0.5));
    }
    case Builtin::srk_alpha1: {
      expect_params(name, params, 1);
      const double a = params[0];
      check_alpha1(name, a);
      const double c2 = 1.0 / (2.0 - 2.0 * a);
      Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, 2);
      A(1, 0) = c2;
      auto B = first_column(-std::sqrt(2.0 * (1.0 - a) / (3.0 * a)),
                            std::sqrt(2.0 * a / (3.0 * (1.0 - a))));
      auto D = first_column(1.0 + std::sqrt(3.0 * (1.0 - a) / (2.0 * a)),
                            1.0 + std::sqrt(6.0 * a * (1.0 - a)) / (2.0 * (a - 1.0)));
      return Tableau(format_params(name, params), A, B, D, v2(a, 1.0 - a), v2(0.0, 1.0),
                     v2(1.0, -1.0), v2(0.0, c2), v2(0.0, 1.0));
    }
    case Builtin::ssrk_alpha1: {
      expect_params(name, params, 1);
      const double a = params[0];
      check_alpha1(name, a);
      Eigen::MatrixXd A(2, 2);
      A << a / 2.0, 0.0, a, (1.0 - a) / 2.0;
      auto B = first_column(-std::sqrt(2.0 * (1.0 - a) / (3.0 * a)),
                            std::sqrt(2.0 * a / (3.0 * (1.0 - a))));
      auto D = first_column(1.0 + std::sqrt(3.0 * (1.0 - a) / (2.0 * a)),
                            1.0 + std::sqrt(6.0 * a * (1.0 - a)) / (2.0 * (a - 1.0)));
      return Tableau(format_params(name, params), A, B, D, v2(a, 1.0 - a), v2(0.0, 1.0),
                     v2(1.0, -1.0), v2(a / 2.0, (a + 1.0) / 2.0), v2(0.0, 1.0));
    }
    case Builtin::ssrk_alpha1_b1: {
      expect_params(name, params, 2);
      const double a = params[0];
      const double b = params[1];
      check_alpha1(name, a);
      const double bound = (2.0 / 3.0) * std::sqrt((1.0 - a) / a);
      if (!(b > -bound && b < bound))
        throw DomainError(std::string(name) + ": b1 = " + std::to_string(b) +
                          " violates -(2/3)sqrt((1-alpha1)/alpha1) < b1 < (2/3)sqrt((1-alpha1)/alpha1) = " +
                          std::to_string(bound));
      const double root = std::sqrt(2.0 / a - 3.0 * b * b - 2.0);
      Eigen::MatrixXd A(2, 2);
      A << a / 2.0, 0.0, a, (1.0 - a) / 2.0;
      auto B = first_column(b, a * b / (a - 1.0));
      auto D = first_column(1.0 - 1.5 * b - 0.5 * root,
                            1.0 - (3.0 * b * a + a * root) / (2.0 * (a - 1.0)));
      return Tableau(format_params(name, params), A, B, D, v2(a, 1.0 - a), v2(0.0, 1.0),
                     v2(1.0, -1.0), v2(a / 2.0, (a + 1.0) / 2.0), v2(0.0, 1.0));
    }
  }
  throw DomainError("unknown builtin scheme");
}

inline Tableau make_builtin(std::string_view name, std::span<const double> params = {}) {
  return make_builtin(parse_builtin(name), params);
}

inline Tableau make_builtin(Builtin which, std::initializer_list<double> params) {
  return make_builtin(which, std::span<const double>(params.begin(), params.size()));
}

}  // namespace ssrk
