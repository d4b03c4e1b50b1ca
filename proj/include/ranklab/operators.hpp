#pragma once

// Fully nonlinear parabolic operators F(A, p, u, x, t), their derivative
// bundles, the quadratic form Q*, and samplers for ellipticity and for the
// inverse-convexity structure condition:
//
//   (A, u, x, t) -> F(A^{-1}, p, u, x, t) is locally convex for each fixed p.
//
// The structure condition holds iff Q*(X, Y, Z, D) >= 0 for every direction,
// where, with derivatives of F at (A, p, u, x, t) and A^{cd} = (A^{-1})_{cd},
//
//   Q* = F^{ab,cd} X_ab X_cd + 2 F^{ab} A^{cd} X_ad X_bc + 2 F^{ab,u} X_ab Y
//      + 2 F^{ab,x_i} X_ab Z_i + 2 F^{ab,t} X_ab D + F^{u,u} Y^2
//      + 2 F^{u,x_i} Y Z_i + 2 F^{u,t} Y D + F^{x_i,x_j} Z_i Z_j
//      + 2 F^{x_i,t} Z_i D + F^{t,t} D^2.
//
// Derivatives with respect to A treat A as a symmetric matrix: F^{ij} is the
// symmetric matrix with dF = sum_ij F^{ij} dA_ij, and F^{ij,kl} carries the
// full index symmetry.

#include <Eigen/Dense>
#include <Eigen/QR>

#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ranklab/errors.hpp"
#include "ranklab/matrixkit.hpp"
#include "ranklab/parallel.hpp"
#include "ranklab/symm.hpp"

namespace ranklab {

/// A point (A, p, u, x, t) at which an operator is evaluated.
struct OperatorPoint {
  SymMatrix A;
  Eigen::VectorXd p;
  double u = 0.0;
  Eigen::VectorXd x;
  double t = 0.0;

  Eigen::Index n() const { return A.dim(); }

  static OperatorPoint at(const SymMatrix& a) {
    const auto n = a.dim();
    return {a, Eigen::VectorXd::Zero(n), 0.0, Eigen::VectorXd::Zero(n), 0.0};
  }
};

/// Nondecreasing convex outer function for compositions g(F_1, ..., F_m).
struct ScalarG {
  std::string name;
  bool nondecreasing = true;
  bool convex = true;
  int arity = 0;  // 0 accepts any number of children
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> grad;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> hess;
};

inline ScalarG g_sum() {
  return {"sum", true, true, 0,
          [](const Eigen::VectorXd& s) { return s.sum(); },
          [](const Eigen::VectorXd& s) { return Eigen::VectorXd(Eigen::VectorXd::Ones(s.size())); },
          [](const Eigen::VectorXd& s) {
            return Eigen::MatrixXd(Eigen::MatrixXd::Zero(s.size(), s.size()));
          }};
}

inline ScalarG g_identity() {
  ScalarG g = g_sum();
  g.name = "identity";
  g.arity = 1;
  return g;
}

/// g(s) = s^alpha on s > 0, alpha >= 1.
inline ScalarG g_power(double alpha) {
  if (!(alpha >= 1.0)) throw ArgumentError("g_power: alpha must be >= 1");
  auto check = [](double s) {
    if (!(s > 0)) throw DomainError("g_power: child value must be positive");
  };
  return {"power", true, true, 1,
          [alpha, check](const Eigen::VectorXd& s) {
            check(s(0));
            return std::pow(s(0), alpha);
          },
          [alpha, check](const Eigen::VectorXd& s) {
            check(s(0));
            return Eigen::VectorXd(Eigen::VectorXd::Constant(1, alpha * std::pow(s(0), alpha - 1)));
          },
          [alpha, check](const Eigen::VectorXd& s) {
            check(s(0));
            return Eigen::MatrixXd(
                Eigen::MatrixXd::Constant(1, 1, alpha * (alpha - 1) * std::pow(s(0), alpha - 2)));
          }};
}

class OperatorSpec;

/// tr(a A) + drift . p + reaction * u + source.
struct LinearOp {
  Eigen::MatrixXd coeff;
  Eigen::VectorXd drift;
  double reaction = 0.0;
  double source = 0.0;
};

/// sigma_k(A)^{1/k}.
struct HessianPowerOp {
  int k = 1;
};

/// (sigma_k(A) / sigma_l(A))^{1/(k-l)}, k > l > 0.
struct HessianQuotientOp {
  int k = 2;
  int l = 1;
};

struct CompositionOp {
  ScalarG g;
  std::vector<OperatorSpec> children;
};

/// Black-box evaluator; every derivative comes from finite differences.
struct CustomOp {
  std::string name;
  std::function<double(const OperatorPoint&)> value;
};

class OperatorSpec {
 public:
  using Kind = std::variant<LinearOp, HessianPowerOp, HessianQuotientOp, CompositionOp, CustomOp>;

  explicit OperatorSpec(Kind kind, std::string label = {})
      : kind_(std::make_shared<Kind>(std::move(kind))), label_(std::move(label)) {}

  const Kind& kind() const { return *kind_; }
  const std::string& label() const { return label_; }
  bool is_linear() const { return std::holds_alternative<LinearOp>(*kind_); }

 private:
  std::shared_ptr<const Kind> kind_;
  std::string label_;
};

/// Linear operator with a symmetric PSD coefficient matrix.
inline OperatorSpec make_linear(const Eigen::MatrixXd& coeff,
                                std::optional<Eigen::VectorXd> drift = std::nullopt,
                                double reaction = 0.0, double source = 0.0) {
  const SymMatrix a(coeff);  // throws on asymmetry
  if (eigenvalues(a).min() < -1e-12 * std::max(1.0, eigenvalues(a).max()))
    throw ArgumentError("make_linear: coefficient matrix must be positive semidefinite");
  LinearOp op{a.matrix(), drift.value_or(Eigen::VectorXd::Zero(coeff.rows())), reaction, source};
  if (op.drift.size() != coeff.rows()) throw ArgumentError("make_linear: drift length mismatch");
  return OperatorSpec(op, "linear");
}

inline OperatorSpec make_heat(Eigen::Index n) {
  return OperatorSpec(LinearOp{Eigen::MatrixXd::Identity(n, n), Eigen::VectorXd::Zero(n), 0.0, 0.0},
                      "heat");
}

inline OperatorSpec make_hessian_power(int k) {
  if (k < 1) throw ArgumentError("make_hessian_power: k must be >= 1");
  return OperatorSpec(HessianPowerOp{k}, "hessian_power");
}

inline OperatorSpec make_hessian_quotient(int k, int l) {
  if (!(k > l && l > 0)) throw ArgumentError("make_hessian_quotient: requires k > l > 0");
  return OperatorSpec(HessianQuotientOp{k, l}, "hessian_quotient");
}

inline OperatorSpec make_custom(std::string name, std::function<double(const OperatorPoint&)> f) {
  return OperatorSpec(CustomOp{name, std::move(f)}, name);
}

/// F = tr(A) - u^2. Violates the structure condition: F^{u,u} = -2.
inline OperatorSpec make_trace_minus_u_squared() {
  return make_custom("trace_minus_u2",
                     [](const OperatorPoint& pt) { return pt.A.matrix().trace() - pt.u * pt.u; });
}

/// g(F_1, ..., F_m). The children are expected to satisfy the structure
/// condition on the target domain; only g's declared shape is checked here.
inline OperatorSpec compose(const ScalarG& g, std::vector<OperatorSpec> children) {
  if (!g.nondecreasing) throw ArgumentError("compose: g must be nondecreasing");
  if (!g.convex) throw ArgumentError("compose: g must be convex");
  if (children.empty()) throw ArgumentError("compose: at least one child required");
  if (g.arity != 0 && static_cast<int>(children.size()) != g.arity)
    throw ArgumentError("compose: g expects " + std::to_string(g.arity) + " children");
  return OperatorSpec(CompositionOp{g, std::move(children)}, "composition(" + g.name + ")");
}

struct DerivativeBundle {
  Eigen::Index n = 0;
  double value = 0.0;
  Eigen::MatrixXd F_A;    // F^{ij}
  Eigen::MatrixXd F_AA;   // F^{ij,kl} at row i*n+j, column k*n+l
  Eigen::MatrixXd F_Au;   // F^{ab,u}
  std::vector<Eigen::MatrixXd> F_Ax;  // F_Ax[i](a,b) = F^{ab,x_i}
  Eigen::MatrixXd F_At;   // F^{ab,t}
  Eigen::VectorXd F_p;    // F^{u_i}
  double F_u = 0.0;
  Eigen::VectorXd F_x;
  double F_t = 0.0;
  double F_uu = 0.0;
  double F_ut = 0.0;
  Eigen::VectorXd F_ux;
  Eigen::MatrixXd F_xx;
  Eigen::VectorXd F_xt;
  double F_tt = 0.0;
  std::optional<Eigen::MatrixXd> A_inv;

  double faa(Eigen::Index i, Eigen::Index j, Eigen::Index k, Eigen::Index l) const {
    return F_AA(i * n + j, k * n + l);
  }

  static DerivativeBundle zeros(Eigen::Index n) {
    DerivativeBundle b;
    b.n = n;
    b.F_A = Eigen::MatrixXd::Zero(n, n);
    b.F_AA = Eigen::MatrixXd::Zero(n * n, n * n);
    b.F_Au = Eigen::MatrixXd::Zero(n, n);
    b.F_Ax.assign(static_cast<std::size_t>(n), Eigen::MatrixXd::Zero(n, n));
    b.F_At = Eigen::MatrixXd::Zero(n, n);
    b.F_p = Eigen::VectorXd::Zero(n);
    b.F_x = Eigen::VectorXd::Zero(n);
    b.F_ux = Eigen::VectorXd::Zero(n);
    b.F_xx = Eigen::MatrixXd::Zero(n, n);
    b.F_xt = Eigen::VectorXd::Zero(n);
    return b;
  }
};

struct EvalOptions {
  bool with_inverse = true;  // populate A_inv; singular A is then a DomainError
  bool check_admissible = true;
  double fd_step = 1e-5;  // relative central-difference step
};

namespace detail {

inline void require_dim(const OperatorPoint& pt, const char* who) {
  const auto n = pt.n();
  if (pt.p.size() != n || pt.x.size() != n)
    throw ArgumentError(std::string(who) + ": p and x must have length n = " + std::to_string(n));
}

inline Spectrum spectrum_of(const Eigen::MatrixXd& a) { return eigenvalues(SymMatrix(a)); }

/// Returns an empty string when admissible, otherwise the reason.
inline std::string inadmissible_reason(const OperatorSpec& spec, const OperatorPoint& pt) {
  struct Visitor {
    const OperatorPoint& pt;
    std::string operator()(const LinearOp& op) const {
      if (op.coeff.rows() != pt.n())
        return "linear coefficient dimension " + std::to_string(op.coeff.rows()) +
               " does not match n = " + std::to_string(pt.n());
      return {};
    }
    std::string hessian(int k) const {
      const Spectrum s = eigenvalues(pt.A);
      if (s.min() < -1e-12 * std::max(1.0, s.max())) return "A is not positive semidefinite";
      if (k > pt.n()) return "k exceeds the dimension";
      for (int j = 1; j <= k; ++j)
        if (!(sigma(s, j) > 0)) return "sigma_" + std::to_string(j) + "(A) is not positive";
      return {};
    }
    std::string operator()(const HessianPowerOp& op) const { return hessian(op.k); }
    std::string operator()(const HessianQuotientOp& op) const { return hessian(op.k); }
    std::string operator()(const CompositionOp& op) const {
      for (const auto& child : op.children)
        if (auto r = inadmissible_reason(child, pt); !r.empty()) return r;
      return {};
    }
    std::string operator()(const CustomOp&) const { return {}; }
  };
  return std::visit(Visitor{pt}, spec.kind());
}

inline double power_value(const Spectrum& s, int k) {
  const double sk = sigma(s, k);
  if (k == 1) return sk;
  if (!(sk > 0)) throw DomainError("hessian_power: sigma_k(A) is not positive");
  return std::pow(sk, 1.0 / k);
}

inline double quotient_value(const Spectrum& s, int k, int l) {
  const double sk = sigma(s, k);
  const double sl = sigma(s, l);
  if (!(sk > 0 && sl > 0)) throw DomainError("hessian_quotient: sigma_k or sigma_l not positive");
  return std::pow(sk / sl, 1.0 / (k - l));
}

inline double value_unchecked(const OperatorSpec& spec, const OperatorPoint& pt);

struct ValueVisitor {
  const OperatorPoint& pt;
  double operator()(const LinearOp& op) const {
    return (op.coeff.cwiseProduct(pt.A.matrix())).sum() + op.drift.dot(pt.p) +
           op.reaction * pt.u + op.source;
  }
  double operator()(const HessianPowerOp& op) const {
    return power_value(eigenvalues(pt.A), op.k);
  }
  double operator()(const HessianQuotientOp& op) const {
    return quotient_value(eigenvalues(pt.A), op.k, op.l);
  }
  double operator()(const CompositionOp& op) const {
    Eigen::VectorXd s(static_cast<Eigen::Index>(op.children.size()));
    for (std::size_t c = 0; c < op.children.size(); ++c)
      s(static_cast<Eigen::Index>(c)) = value_unchecked(op.children[c], pt);
    return op.g.value(s);
  }
  double operator()(const CustomOp& op) const { return op.value(pt); }
};

inline double value_unchecked(const OperatorSpec& spec, const OperatorPoint& pt) {
  return std::visit(ValueVisitor{pt}, spec.kind());
}

/// Gradient of a spectral function f(lambda) lifted to the matrix:
/// P diag(df/dlambda_i) P^T.
inline Eigen::MatrixXd spectral_gradient(const SymMatrix& a,
                                         const std::function<double(std::span<const double>, std::size_t)>& df) {
  auto [spec, rot] = spectral(a);
  Eigen::VectorXd g(spec.size());
  for (std::size_t i = 0; i < spec.size(); ++i) g(static_cast<Eigen::Index>(i)) = df(spec.values(), i);
  const Eigen::MatrixXd& p = rot.matrix();
  Eigen::MatrixXd out = p * g.asDiagonal() * p.transpose();
  return 0.5 * (out + out.transpose());
}

/// Analytic F^{ij} where the kind admits one.
inline std::optional<Eigen::MatrixXd> analytic_grad_A(const OperatorSpec& spec,
                                                      const OperatorPoint& pt) {
  if (const auto* op = std::get_if<LinearOp>(&spec.kind())) return op->coeff;
  if (const auto* op = std::get_if<HessianPowerOp>(&spec.kind())) {
    const int k = op->k;
    const double f = power_value(eigenvalues(pt.A), k);
    const double sk = sigma(eigenvalues(pt.A), k);
    return spectral_gradient(pt.A, [&](std::span<const double> lam, std::size_t i) {
      const double dsk = sigma_deleted(lam, k - 1, i);
      if (k == 1) return dsk;
      return f / (k * sk) * dsk;
    });
  }
  if (const auto* op = std::get_if<HessianQuotientOp>(&spec.kind())) {
    const int k = op->k;
    const int l = op->l;
    const Spectrum s = eigenvalues(pt.A);
    const double f = quotient_value(s, k, l);
    const double sk = sigma(s, k);
    const double sl = sigma(s, l);
    return spectral_gradient(pt.A, [&](std::span<const double> lam, std::size_t i) {
      return f / (k - l) *
             (sigma_deleted(lam, k - 1, i) / sk - sigma_deleted(lam, l - 1, i) / sl);
    });
  }
  return std::nullopt;
}

/// Scalar argument slots: 0 -> u, 1..n -> x, n+1 -> t.
inline OperatorPoint shift_scalar(const OperatorPoint& pt, Eigen::Index slot, double h) {
  OperatorPoint q = pt;
  const auto n = pt.n();
  if (slot == 0)
    q.u += h;
  else if (slot <= n)
    q.x(slot - 1) += h;
  else
    q.t += h;
  return q;
}

inline double scalar_at(const OperatorPoint& pt, Eigen::Index slot) {
  const auto n = pt.n();
  if (slot == 0) return pt.u;
  if (slot <= n) return pt.x(slot - 1);
  return pt.t;
}

/// Unit symmetric direction S_ij: E_ii, or (E_ij + E_ji)/2.
inline Eigen::MatrixXd sym_unit(Eigen::Index n, Eigen::Index i, Eigen::Index j) {
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(n, n);
  if (i == j) {
    s(i, i) = 1.0;
  } else {
    s(i, j) = 0.5;
    s(j, i) = 0.5;
  }
  return s;
}

inline OperatorPoint shift_A(const OperatorPoint& pt, const Eigen::MatrixXd& dir, double h) {
  OperatorPoint q = pt;
  q.A = SymMatrix(Eigen::MatrixXd(pt.A.matrix() + h * dir));
  return q;
}

inline OperatorPoint shift_p(const OperatorPoint& pt, Eigen::Index i, double h) {
  OperatorPoint q = pt;
  q.p(i) += h;
  return q;
}

/// Finite-difference bundle for nonlinear kinds. F^{ij} is analytic when the
/// kind provides it and all second derivatives touching A then come from
/// central differences of F^{ij}; otherwise everything is differenced from
/// the value.
inline DerivativeBundle fd_bundle(const OperatorSpec& spec, const OperatorPoint& pt,
                                  const EvalOptions& opts) {
  const auto n = pt.n();
  DerivativeBundle b = DerivativeBundle::zeros(n);
  auto f = [&](const OperatorPoint& q) { return value_unchecked(spec, q); };
  b.value = f(pt);

  const double hA = opts.fd_step * std::max(1.0, pt.A.matrix().cwiseAbs().maxCoeff());
  auto h_scalar = [&](Eigen::Index slot) {
    return opts.fd_step * std::max(1.0, std::abs(scalar_at(pt, slot)));
  };
  const Eigen::Index scalars = n + 2;

  std::vector<std::pair<Eigen::Index, Eigen::Index>> pairs;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) pairs.emplace_back(i, j);

  auto grad = analytic_grad_A(spec, pt);
  auto grad_at = [&](const OperatorPoint& q) { return *analytic_grad_A(spec, q); };

  // First derivatives.
  if (grad) {
    b.F_A = *grad;
  } else {
    for (auto [i, j] : pairs) {
      const Eigen::MatrixXd s = sym_unit(n, i, j);
      const double d = (f(shift_A(pt, s, hA)) - f(shift_A(pt, s, -hA))) / (2 * hA);
      b.F_A(i, j) = d;
      b.F_A(j, i) = d;
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const double hp = opts.fd_step * std::max(1.0, std::abs(pt.p(i)));
    b.F_p(i) = (f(shift_p(pt, i, hp)) - f(shift_p(pt, i, -hp))) / (2 * hp);
  }
  Eigen::VectorXd first(scalars);
  for (Eigen::Index s = 0; s < scalars; ++s) {
    const double h = h_scalar(s);
    first(s) = (f(shift_scalar(pt, s, h)) - f(shift_scalar(pt, s, -h))) / (2 * h);
  }
  b.F_u = first(0);
  b.F_x = first.segment(1, n);
  b.F_t = first(n + 1);

  // A-A block.
  auto put_aa = [&](Eigen::Index i, Eigen::Index j, Eigen::Index k, Eigen::Index l, double v) {
    for (auto [a, c] : {std::pair{i, j}, std::pair{j, i}})
      for (auto [d, e] : {std::pair{k, l}, std::pair{l, k}}) b.F_AA(a * n + c, d * n + e) = v;
  };
  if (grad) {
    for (auto [k, l] : pairs) {
      const Eigen::MatrixXd s = sym_unit(n, k, l);
      const Eigen::MatrixXd d =
          (grad_at(shift_A(pt, s, hA)) - grad_at(shift_A(pt, s, -hA))) / (2 * hA);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
          b.F_AA(i * n + j, k * n + l) = d(i, j);
          b.F_AA(i * n + j, l * n + k) = d(i, j);
        }
    }
    b.F_AA = 0.5 * (b.F_AA + b.F_AA.transpose()).eval();
  } else {
    for (std::size_t p1 = 0; p1 < pairs.size(); ++p1)
      for (std::size_t p2 = p1; p2 < pairs.size(); ++p2) {
        const auto [i, j] = pairs[p1];
        const auto [k, l] = pairs[p2];
        const Eigen::MatrixXd s1 = sym_unit(n, i, j);
        const Eigen::MatrixXd s2 = sym_unit(n, k, l);
        double v;
        if (p1 == p2) {
          v = (f(shift_A(pt, s1, hA)) - 2 * b.value + f(shift_A(pt, s1, -hA))) / (hA * hA);
        } else {
          v = (f(shift_A(pt, s1 + s2, hA)) - f(shift_A(pt, s1 - s2, hA)) -
               f(shift_A(pt, s2 - s1, hA)) + f(shift_A(pt, s1 + s2, -hA))) /
              (4 * hA * hA);
        }
        put_aa(i, j, k, l, v);
        put_aa(k, l, i, j, v);
      }
  }

  // A-scalar block.
  std::vector<Eigen::MatrixXd> a_scalar(static_cast<std::size_t>(scalars),
                                        Eigen::MatrixXd::Zero(n, n));
  for (Eigen::Index s = 0; s < scalars; ++s) {
    const double h = h_scalar(s);
    Eigen::MatrixXd& m = a_scalar[static_cast<std::size_t>(s)];
    if (grad) {
      m = (grad_at(shift_scalar(pt, s, h)) - grad_at(shift_scalar(pt, s, -h))) / (2 * h);
    } else {
      for (auto [i, j] : pairs) {
        const Eigen::MatrixXd d = sym_unit(n, i, j);
        auto fa = [&](double sa, double ss) { return f(shift_scalar(shift_A(pt, d, sa), s, ss)); };
        const double v = (fa(hA, h) - fa(hA, -h) - fa(-hA, h) + fa(-hA, -h)) / (4 * hA * h);
        m(i, j) = v;
        m(j, i) = v;
      }
    }
  }
  b.F_Au = a_scalar[0];
  for (Eigen::Index i = 0; i < n; ++i) b.F_Ax[static_cast<std::size_t>(i)] = a_scalar[i + 1];
  b.F_At = a_scalar[static_cast<std::size_t>(n + 1)];

  // Scalar-scalar block.
  Eigen::MatrixXd ss(scalars, scalars);
  for (Eigen::Index s1 = 0; s1 < scalars; ++s1)
    for (Eigen::Index s2 = s1; s2 < scalars; ++s2) {
      const double h1 = h_scalar(s1);
      const double h2 = h_scalar(s2);
      double v;
      if (s1 == s2) {
        v = (f(shift_scalar(pt, s1, h1)) - 2 * b.value + f(shift_scalar(pt, s1, -h1))) / (h1 * h1);
      } else {
        auto fs = [&](double a, double c) { return f(shift_scalar(shift_scalar(pt, s1, a), s2, c)); };
        v = (fs(h1, h2) - fs(h1, -h2) - fs(-h1, h2) + fs(-h1, -h2)) / (4 * h1 * h2);
      }
      ss(s1, s2) = v;
      ss(s2, s1) = v;
    }
  b.F_uu = ss(0, 0);
  b.F_ux = ss.block(1, 0, n, 1);
  b.F_ut = ss(0, n + 1);
  b.F_xx = ss.block(1, 1, n, n);
  b.F_xt = ss.block(1, n + 1, n, 1);
  b.F_tt = ss(n + 1, n + 1);
  return b;
}

inline DerivativeBundle bundle_no_inverse(const OperatorSpec& spec, const OperatorPoint& pt,
                                          const EvalOptions& opts);

inline DerivativeBundle linear_bundle(const LinearOp& op, const OperatorPoint& pt) {
  DerivativeBundle b = DerivativeBundle::zeros(pt.n());
  b.value = ValueVisitor{pt}(op);
  b.F_A = op.coeff;
  b.F_p = op.drift;
  b.F_u = op.reaction;
  return b;
}

/// Chain rule for g(F_1, ..., F_m).
inline DerivativeBundle composition_bundle(const CompositionOp& op, const OperatorPoint& pt,
                                           const EvalOptions& opts) {
  const auto n = pt.n();
  const auto m = static_cast<Eigen::Index>(op.children.size());
  std::vector<DerivativeBundle> kids;
  kids.reserve(op.children.size());
  Eigen::VectorXd s(m);
  for (Eigen::Index c = 0; c < m; ++c) {
    kids.push_back(bundle_no_inverse(op.children[static_cast<std::size_t>(c)], pt, opts));
    s(c) = kids.back().value;
  }
  const Eigen::VectorXd g1 = op.g.grad(s);
  const Eigen::MatrixXd g2 = op.g.hess(s);

  DerivativeBundle b = DerivativeBundle::zeros(n);
  b.value = op.g.value(s);
  for (Eigen::Index c = 0; c < m; ++c) {
    const auto& k = kids[static_cast<std::size_t>(c)];
    const double w = g1(c);
    b.F_A += w * k.F_A;
    b.F_AA += w * k.F_AA;
    b.F_Au += w * k.F_Au;
    for (Eigen::Index i = 0; i < n; ++i) b.F_Ax[i] += w * k.F_Ax[i];
    b.F_At += w * k.F_At;
    b.F_p += w * k.F_p;
    b.F_u += w * k.F_u;
    b.F_x += w * k.F_x;
    b.F_t += w * k.F_t;
    b.F_uu += w * k.F_uu;
    b.F_ut += w * k.F_ut;
    b.F_ux += w * k.F_ux;
    b.F_xx += w * k.F_xx;
    b.F_xt += w * k.F_xt;
    b.F_tt += w * k.F_tt;
  }
  for (Eigen::Index c = 0; c < m; ++c)
    for (Eigen::Index d = 0; d < m; ++d) {
      const double w = g2(c, d);
      if (w == 0.0) continue;
      const auto& kc = kids[static_cast<std::size_t>(c)];
      const auto& kd = kids[static_cast<std::size_t>(d)];
      const Eigen::Map<const Eigen::VectorXd> vc(kc.F_A.data(), n * n);
      const Eigen::Map<const Eigen::VectorXd> vd(kd.F_A.data(), n * n);
      // F_A is symmetric, so column-major vec equals the row-major index i*n+j.
      b.F_AA += w * vc * vd.transpose();
      b.F_Au += w * kc.F_A * kd.F_u;
      for (Eigen::Index i = 0; i < n; ++i) b.F_Ax[i] += w * kc.F_A * kd.F_x(i);
      b.F_At += w * kc.F_A * kd.F_t;
      b.F_uu += w * kc.F_u * kd.F_u;
      b.F_ut += w * kc.F_u * kd.F_t;
      b.F_ux += w * kc.F_u * kd.F_x;
      b.F_xx += w * kc.F_x * kd.F_x.transpose();
      b.F_xt += w * kc.F_x * kd.F_t;
      b.F_tt += w * kc.F_t * kd.F_t;
    }
  return b;
}

inline DerivativeBundle bundle_no_inverse(const OperatorSpec& spec, const OperatorPoint& pt,
                                          const EvalOptions& opts) {
  if (const auto* op = std::get_if<LinearOp>(&spec.kind())) return linear_bundle(*op, pt);
  if (const auto* op = std::get_if<CompositionOp>(&spec.kind()))
    return composition_bundle(*op, pt, opts);
  return fd_bundle(spec, pt, opts);
}

}  // namespace detail

/// Value of F at pt; throws DomainError outside the admissible set.
inline double value(const OperatorSpec& spec, const OperatorPoint& pt, bool check_admissible = true) {
  detail::require_dim(pt, "value");
  if (check_admissible)
    if (auto r = detail::inadmissible_reason(spec, pt); !r.empty())
      throw DomainError("operator " + spec.label() + ": " + r);
  return detail::value_unchecked(spec, pt);
}

inline bool admissible(const OperatorSpec& spec, const OperatorPoint& pt) {
  return detail::inadmissible_reason(spec, pt).empty();
}

/// F^{ij} only: analytic for linear and Hessian kinds, chain rule for
/// compositions, central differences otherwise.
inline Eigen::MatrixXd grad_A(const OperatorSpec& spec, const OperatorPoint& pt) {
  detail::require_dim(pt, "grad_A");
  if (auto g = detail::analytic_grad_A(spec, pt)) return *g;
  if (const auto* op = std::get_if<CompositionOp>(&spec.kind())) {
    Eigen::VectorXd s(static_cast<Eigen::Index>(op->children.size()));
    for (std::size_t c = 0; c < op->children.size(); ++c)
      s(static_cast<Eigen::Index>(c)) = detail::value_unchecked(op->children[c], pt);
    const Eigen::VectorXd g1 = op->g.grad(s);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(pt.n(), pt.n());
    for (std::size_t c = 0; c < op->children.size(); ++c)
      out += g1(static_cast<Eigen::Index>(c)) * grad_A(op->children[c], pt);
    return out;
  }
  const auto n = pt.n();
  const double h = 1e-5 * std::max(1.0, pt.A.matrix().cwiseAbs().maxCoeff());
  Eigen::MatrixXd out(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      const Eigen::MatrixXd s = detail::sym_unit(n, i, j);
      const double d = (detail::value_unchecked(spec, detail::shift_A(pt, s, h)) -
                        detail::value_unchecked(spec, detail::shift_A(pt, s, -h))) /
                       (2 * h);
      out(i, j) = d;
      out(j, i) = d;
    }
  return out;
}

/// Value and every derivative appearing in Q*.
inline DerivativeBundle eval(const OperatorSpec& spec, const OperatorPoint& pt,
                             const EvalOptions& opts = {}) {
  detail::require_dim(pt, "eval");
  if (opts.check_admissible)
    if (auto r = detail::inadmissible_reason(spec, pt); !r.empty())
      throw DomainError("eval: A is not admissible for " + spec.label() + ": " + r);
  DerivativeBundle b = detail::bundle_no_inverse(spec, pt, opts);
  if (opts.with_inverse) {
    auto [s, rot] = spectral(pt.A);
    const double scale = std::max(1.0, std::abs(s.max()));
    for (double v : s.values())
      if (std::abs(v) <= 1e-14 * scale) throw DomainError("eval: A is singular, A^{-1} undefined");
    Eigen::VectorXd inv(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) inv(static_cast<Eigen::Index>(i)) = 1.0 / s[i];
    Eigen::MatrixXd ai = rot.matrix() * inv.asDiagonal() * rot.matrix().transpose();
    b.A_inv = 0.5 * (ai + ai.transpose());
  }
  return b;
}

/// Direction (X, Y, Z, D) for Q*.
struct QDirection {
  SymMatrix X;
  double Y = 0.0;
  Eigen::VectorXd Z;
  double D = 0.0;

  static QDirection zero(Eigen::Index n) {
    return {SymMatrix(n), 0.0, Eigen::VectorXd::Zero(n), 0.0};
  }
  QDirection scaled(double c) const {
    return {SymMatrix(Eigen::MatrixXd(c * X.matrix())), c * Y, c * Z, c * D};
  }
  double norm() const {
    return std::sqrt(X.matrix().squaredNorm() + Y * Y + Z.squaredNorm() + D * D);
  }
};

/// The eleven terms of Q*, in the order they are written in the header.
inline std::array<double, 11> qstar_terms(const DerivativeBundle& b, const QDirection& dir) {
  const auto n = b.n;
  if (dir.X.dim() != n || dir.Z.size() != n) throw ArgumentError("qstar: dimension mismatch");
  if (!b.A_inv) throw DomainError("qstar: bundle has no A^{-1}");
  const Eigen::MatrixXd& X = dir.X.matrix();
  const Eigen::MatrixXd& Ainv = *b.A_inv;
  std::array<double, 11> t{};

  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index c = 0; c < n; ++c)
      for (Eigen::Index d = 0; d < n; ++d)
        for (Eigen::Index e = 0; e < n; ++e) t[0] += b.faa(a, c, d, e) * X(a, c) * X(d, e);

  for (Eigen::Index a = 0; a < n; ++a)
    for (Eigen::Index bb = 0; bb < n; ++bb) {
      if (b.F_A(a, bb) == 0.0) continue;
      for (Eigen::Index c = 0; c < n; ++c)
        for (Eigen::Index d = 0; d < n; ++d) t[1] += b.F_A(a, bb) * Ainv(c, d) * X(a, d) * X(bb, c);
    }
  t[1] *= 2;

  t[2] = 2 * (b.F_Au.cwiseProduct(X)).sum() * dir.Y;
  for (Eigen::Index i = 0; i < n; ++i) t[3] += (b.F_Ax[static_cast<std::size_t>(i)].cwiseProduct(X)).sum() * dir.Z(i);
  t[3] *= 2;
  t[4] = 2 * (b.F_At.cwiseProduct(X)).sum() * dir.D;
  t[5] = b.F_uu * dir.Y * dir.Y;
  t[6] = 2 * b.F_ux.dot(dir.Z) * dir.Y;
  t[7] = 2 * b.F_ut * dir.Y * dir.D;
  t[8] = dir.Z.dot(b.F_xx * dir.Z);
  t[9] = 2 * b.F_xt.dot(dir.Z) * dir.D;
  t[10] = b.F_tt * dir.D * dir.D;
  return t;
}

inline double qstar(const DerivativeBundle& b, const QDirection& dir) {
  double sum = 0.0;
  for (double v : qstar_terms(b, dir)) sum += v;
  return sum;
}

/// lambda_min(F^{ij}) > tol.
inline bool check_ellipticity(const DerivativeBundle& b, double tol = 0.0) {
  return eigenvalues(SymMatrix(Eigen::MatrixXd(0.5 * (b.F_A + b.F_A.transpose())))).min() > tol;
}

/// Box from which base points and chords are drawn. A is sampled as
/// Q diag(mu) Q^T with Haar Q and mu log-uniform in [a_min, a_max].
struct StructureSampling {
  Eigen::Index n = 2;
  std::size_t num_points = 200;
  std::size_t num_directions = 10;  // random directions (and chords) per base point
  std::uint64_t seed = 1;
  double a_min = 1e-2;
  double a_max = 1.0;
  double p_lo = -1, p_hi = 1;
  double u_lo = -1, u_hi = 1;
  double x_lo = -1, x_hi = 1;
  double t_lo = 0, t_hi = 1;
  double qstar_abs_tol = 1e-10;
  double qstar_rel_tol = 1e-7;  // relative to sum of |terms|
  double chord_tol = 1e-8;      // on second differences along a chord
  int chord_points = 64;
};

struct Witness {
  std::string test;       // "qstar" or "chord"
  std::string direction;  // "Y", "X(0,1)", "random#3", "chord#2", ...
  double value = 0.0;
  std::size_t sample = 0;
  OperatorPoint base;
  std::string describe() const;
};

struct Verdict {
  bool pass = false;
  bool qstar_pass = false;
  bool chord_pass = false;
  double min_qstar = 0.0;
  double min_chord_second_difference = 0.0;
  std::optional<Witness> qstar_witness;
  std::optional<Witness> chord_witness;
  std::uint64_t seed = 0;
  std::size_t qstar_samples = 0;
  std::size_t chord_samples = 0;
  std::string sampling_note;

  /// Both tests answered the same way.
  bool tests_agree() const { return qstar_pass == chord_pass; }
};

inline std::string Witness::describe() const {
  std::ostringstream os;
  os.precision(15);
  os << test << " witness at sample " << sample << ", direction " << direction << ", value "
     << value << ", u = " << base.u << ", t = " << base.t << ", A diag = (";
  for (Eigen::Index i = 0; i < base.A.dim(); ++i) os << (i ? ", " : "") << base.A(i, i);
  os << ")";
  return os.str();
}

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream per (seed, sample index, purpose).
inline std::mt19937_64 sample_rng(std::uint64_t seed, std::uint64_t index, std::uint64_t salt) {
  return std::mt19937_64(splitmix64(splitmix64(seed ^ (salt * 0x632be59bd9b4e019ULL)) + index));
}

inline Eigen::MatrixXd haar_orthogonal(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::MatrixXd g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) g(i, j) = normal(rng);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Eigen::Index i = 0; i < n; ++i)
    if (r(i, i) < 0) q.col(i) *= -1.0;
  return q;
}

inline Eigen::MatrixXd random_spd(Eigen::Index n, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const Eigen::MatrixXd q = haar_orthogonal(n, rng);
  Eigen::VectorXd mu(n);
  for (Eigen::Index i = 0; i < n; ++i)
    mu(i) = std::exp(std::log(lo) + unit(rng) * (std::log(hi) - std::log(lo)));
  Eigen::MatrixXd a = q * mu.asDiagonal() * q.transpose();
  return 0.5 * (a + a.transpose());
}

inline OperatorPoint random_point(const StructureSampling& s, std::mt19937_64& rng) {
  auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
  OperatorPoint pt{SymMatrix(random_spd(s.n, s.a_min, s.a_max, rng)), Eigen::VectorXd(s.n), 0.0,
                   Eigen::VectorXd(s.n), 0.0};
  for (Eigen::Index i = 0; i < s.n; ++i) pt.p(i) = uni(s.p_lo, s.p_hi);
  pt.u = uni(s.u_lo, s.u_hi);
  for (Eigen::Index i = 0; i < s.n; ++i) pt.x(i) = uni(s.x_lo, s.x_hi);
  pt.t = uni(s.t_lo, s.t_hi);
  return pt;
}

inline std::optional<OperatorPoint> admissible_point(const OperatorSpec& spec,
                                                     const StructureSampling& s,
                                                     std::mt19937_64& rng) {
  for (int attempt = 0; attempt < 100; ++attempt) {
    OperatorPoint pt = random_point(s, rng);
    if (admissible(spec, pt)) return pt;
  }
  return std::nullopt;
}

/// Canonical unit directions first (X basis, Y, Z_i, D), then random unit ones.
inline std::vector<std::pair<std::string, QDirection>> probe_directions(Eigen::Index n,
                                                                        std::size_t random_count,
                                                                        std::mt19937_64& rng) {
  std::vector<std::pair<std::string, QDirection>> out;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i; j < n; ++j) {
      QDirection d = QDirection::zero(n);
      const double v = i == j ? 1.0 : 1.0 / std::sqrt(2.0);
      d.X.set(i, j, v);
      out.emplace_back("X(" + std::to_string(i) + "," + std::to_string(j) + ")", d);
    }
  {
    QDirection d = QDirection::zero(n);
    d.Y = 1.0;
    out.emplace_back("Y", d);
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    QDirection d = QDirection::zero(n);
    d.Z(i) = 1.0;
    out.emplace_back("Z(" + std::to_string(i) + ")", d);
  }
  {
    QDirection d = QDirection::zero(n);
    d.D = 1.0;
    out.emplace_back("D", d);
  }
  std::normal_distribution<double> normal;
  for (std::size_t r = 0; r < random_count; ++r) {
    Eigen::MatrixXd x(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = i; j < n; ++j) x(i, j) = x(j, i) = normal(rng);
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) z(i) = normal(rng);
    const double y = normal(rng);
    const double dd = normal(rng);
    QDirection d{SymMatrix(x), y, z, dd};
    out.emplace_back("random#" + std::to_string(r), d.scaled(1.0 / d.norm()));
  }
  return out;
}

}  // namespace detail

/// Samples both sides of the structure-condition equivalence:
///   Test 1: Q* >= -(abs_tol + rel_tol * sum|terms|) over canonical and random
///           unit directions at every base point.
///   Test 2: G(B, u, x, t) = F(B^{-1}, p, u, x, t) has second differences
///           >= -chord_tol along random chords with positive definite B.
/// A pass is a seeded statistical certificate, not a proof.
inline Verdict check_structure_condition(const OperatorSpec& spec, const StructureSampling& s) {
  if (s.n < 1) throw ConfigError("check_structure_condition: n must be >= 1");
  if (!(s.a_min > 0 && s.a_max >= s.a_min))
    throw ConfigError("check_structure_condition: need 0 < a_min <= a_max");
  if (s.a_max / s.a_min > 1e6)
    throw ConfigError("check_structure_condition: eigenvalue box exceeds condition number 1e6");
  if (s.num_points == 0) throw ConfigError("check_structure_condition: num_points must be > 0");
  if (s.chord_points < 3) throw ConfigError("check_structure_condition: chord_points must be >= 3");

  struct PointResult {
    double min_q = std::numeric_limits<double>::infinity();
    bool q_ok = true;
    std::optional<Witness> q_witness;
    double min_chord = std::numeric_limits<double>::infinity();
    bool chord_ok = true;
    std::optional<Witness> chord_witness;
    std::size_t q_count = 0;
    std::size_t chord_count = 0;
    bool found = false;
  };
  std::vector<PointResult> results(s.num_points);

  parallel::for_each_index(s.num_points, [&](std::size_t idx) {
    PointResult& r = results[idx];
    auto rng = detail::sample_rng(s.seed, idx, 1);
    auto base = detail::admissible_point(spec, s, rng);
    if (!base) return;
    r.found = true;

    // Test 1.
    const DerivativeBundle b = eval(spec, *base);
    for (const auto& [name, dir] : detail::probe_directions(s.n, s.num_directions, rng)) {
      const auto terms = qstar_terms(b, dir);
      double q = 0.0;
      double mag = 0.0;
      for (double v : terms) {
        q += v;
        mag += std::abs(v);
      }
      ++r.q_count;
      const bool ok = q >= -(s.qstar_abs_tol + s.qstar_rel_tol * mag);
      if (q < r.min_q) r.min_q = q;
      if (!ok) r.q_ok = false;
      if (!ok && (!r.q_witness || q < r.q_witness->value))
        r.q_witness = Witness{"qstar", name, q, idx, *base};
    }

    // Test 2: chords through B0 = A^{-1}.
    auto chord_rng = detail::sample_rng(s.seed, idx, 2);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> normal;
    const Eigen::MatrixXd b0 = *b.A_inv;
    const double b0_min = eigenvalues(SymMatrix(b0)).min();
    for (std::size_t c = 0; c < s.num_directions; ++c) {
      Eigen::MatrixXd dir(s.n, s.n);
      for (Eigen::Index i = 0; i < s.n; ++i)
        for (Eigen::Index j = i; j < s.n; ++j) dir(i, j) = dir(j, i) = normal(chord_rng);
      const double spectral_norm = eigenvalues(SymMatrix(dir)).values()[0];
      const double spread = std::max(std::abs(spectral_norm),
                                     std::abs(eigenvalues(SymMatrix(dir)).min()));
      dir *= 0.5 * b0_min * unit(chord_rng) / std::max(spread, 1e-300);

      OperatorPoint end = *base;
      end.u = std::uniform_real_distribution<double>(s.u_lo, s.u_hi)(chord_rng);
      for (Eigen::Index i = 0; i < s.n; ++i)
        end.x(i) = std::uniform_real_distribution<double>(s.x_lo, s.x_hi)(chord_rng);
      end.t = std::uniform_real_distribution<double>(s.t_lo, s.t_hi)(chord_rng);

      std::vector<double> g(static_cast<std::size_t>(s.chord_points));
      bool chord_valid = true;
      for (int j = 0; j < s.chord_points; ++j) {
        const double lam = static_cast<double>(j) / (s.chord_points - 1);
        const Eigen::MatrixXd bj = b0 + lam * dir;
        Eigen::LLT<Eigen::MatrixXd> llt(bj);
        if (llt.info() != Eigen::Success) {
          chord_valid = false;
          break;
        }
        Eigen::MatrixXd aj = llt.solve(Eigen::MatrixXd::Identity(s.n, s.n));
        OperatorPoint q{SymMatrix(Eigen::MatrixXd(0.5 * (aj + aj.transpose()))), base->p,
                        base->u + lam * (end.u - base->u), base->x + lam * (end.x - base->x),
                        base->t + lam * (end.t - base->t)};
        if (!admissible(spec, q)) {
          chord_valid = false;
          break;
        }
        g[static_cast<std::size_t>(j)] = detail::value_unchecked(spec, q);
      }
      if (!chord_valid) continue;
      ++r.chord_count;
      for (std::size_t j = 1; j + 1 < g.size(); ++j) {
        const double d2 = g[j - 1] - 2 * g[j] + g[j + 1];
        if (d2 < r.min_chord) r.min_chord = d2;
        if (d2 < -s.chord_tol) {
          r.chord_ok = false;
          if (!r.chord_witness || d2 < r.chord_witness->value)
            r.chord_witness = Witness{"chord", "chord#" + std::to_string(c), d2, idx, *base};
        }
      }
    }
  });

  Verdict v;
  v.seed = s.seed;
  v.qstar_pass = true;
  v.chord_pass = true;
  v.min_qstar = std::numeric_limits<double>::infinity();
  v.min_chord_second_difference = std::numeric_limits<double>::infinity();
  std::size_t found = 0;
  for (const auto& r : results) {
    if (!r.found) continue;
    ++found;
    v.qstar_samples += r.q_count;
    v.chord_samples += r.chord_count;
    v.min_qstar = std::min(v.min_qstar, r.min_q);
    v.min_chord_second_difference = std::min(v.min_chord_second_difference, r.min_chord);
    if (!r.q_ok) {
      v.qstar_pass = false;
      if (!v.qstar_witness || r.q_witness->value < v.qstar_witness->value) v.qstar_witness = r.q_witness;
    }
    if (!r.chord_ok) {
      v.chord_pass = false;
      if (!v.chord_witness || r.chord_witness->value < v.chord_witness->value)
        v.chord_witness = r.chord_witness;
    }
  }
  if (found == 0)
    throw ConfigError("check_structure_condition: no admissible samples in the sampling box");
  v.pass = v.qstar_pass && v.chord_pass;
  std::ostringstream note;
  note << "statistical certificate: " << found << " base points, seed " << s.seed
       << ", A eigenvalues log-uniform in [" << s.a_min << ", " << s.a_max << "], u in [" << s.u_lo
       << ", " << s.u_hi << "], x in [" << s.x_lo << ", " << s.x_hi << "]^n, t in [" << s.t_lo
       << ", " << s.t_hi << "]";
  v.sampling_note = note.str();
  return v;
}

struct EllipticityReport {
  bool pass = false;
  double min_eigenvalue = 0.0;  // min over samples of lambda_min(F^{ij})
  std::size_t samples = 0;
};

/// check_ellipticity over the same base points check_structure_condition draws.
inline EllipticityReport check_ellipticity_sampled(const OperatorSpec& spec, const StructureSampling& s,
                                                   double tol = 0.0) {
  std::vector<std::optional<double>> mins(s.num_points);
  parallel::for_each_index(s.num_points, [&](std::size_t idx) {
    auto rng = detail::sample_rng(s.seed, idx, 1);
    auto base = detail::admissible_point(spec, s, rng);
    if (!base) return;
    const Eigen::MatrixXd fa = grad_A(spec, *base);
    mins[idx] = eigenvalues(SymMatrix(Eigen::MatrixXd(0.5 * (fa + fa.transpose())))).min();
  });
  EllipticityReport r;
  r.min_eigenvalue = std::numeric_limits<double>::infinity();
  for (const auto& m : mins)
    if (m) {
      ++r.samples;
      r.min_eigenvalue = std::min(r.min_eigenvalue, *m);
    }
  if (r.samples == 0) throw ConfigError("check_ellipticity_sampled: no admissible samples in the sampling box");
  r.pass = r.min_eigenvalue > tol;
  return r;
}

}  // namespace ranklab
