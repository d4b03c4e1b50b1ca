#pragma once

// Elementary symmetric functions on spectra and symmetric matrices.
//
// sigma_k(lambda) is the sum of all k-fold products of distinct entries of
// lambda, with sigma_0 = 1 and sigma_k = 0 for k > n. For a symmetric matrix
// W, sigma_k(W) = sigma_k(eigenvalues of W). The "deleted" variants
// sigma_k(W|i) and sigma_k(W|ij) drop the listed rows and columns first.
//
// Indices in this library are zero-based throughout.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "ranklab/errors.hpp"

namespace ranklab {

/// Eigenvalue vector, always sorted descending.
class Spectrum {
 public:
  explicit Spectrum(std::vector<double> values) : values_(std::move(values)) {
    if (values_.empty()) throw ArgumentError("Spectrum: length must be >= 1");
    std::stable_sort(values_.begin(), values_.end(), std::greater<>());
  }
  Spectrum(std::initializer_list<double> values)
      : Spectrum(std::vector<double>(values)) {}

  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t i) const { return values_[i]; }
  std::span<const double> values() const { return values_; }
  double max() const { return values_.front(); }
  double min() const { return values_.back(); }

 private:
  std::vector<double> values_;
};

/// Square matrix whose stored entries are exactly symmetric.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(Eigen::Index dim) : m_(Eigen::MatrixXd::Zero(dim, dim)) {
    if (dim < 1) throw ArgumentError("SymMatrix: dim must be >= 1");
  }

  /// Accepts a matrix that is symmetric up to 1e-12 relative to its largest
  /// entry; the stored copy is the exact average of m and its transpose.
  explicit SymMatrix(const Eigen::MatrixXd& m) {
    if (m.rows() != m.cols() || m.rows() < 1)
      throw ArgumentError("SymMatrix: matrix must be square and non-empty");
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
    if (!(asym <= 1e-12 * scale))
      throw ArgumentError("SymMatrix: input is not symmetric (max |W - W^T| = " +
                          std::to_string(asym) + ")");
    m_ = 0.5 * (m + m.transpose());
  }

  static SymMatrix identity(Eigen::Index dim) {
    return SymMatrix(Eigen::MatrixXd::Identity(dim, dim));
  }
  static SymMatrix diagonal(std::span<const double> d) {
    SymMatrix w(static_cast<Eigen::Index>(d.size()));
    for (std::size_t i = 0; i < d.size(); ++i) w.m_(i, i) = d[i];
    return w;
  }
  static SymMatrix diagonal(std::initializer_list<double> d) {
    return diagonal(std::span<const double>(d.begin(), d.size()));
  }

  Eigen::Index dim() const { return m_.rows(); }
  double operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }

  /// Writes both (i,j) and (j,i).
  void set(Eigen::Index i, Eigen::Index j, double v) {
    m_(i, j) = v;
    m_(j, i) = v;
  }

  const Eigen::MatrixXd& matrix() const { return m_; }

  /// Max |off-diagonal| <= 1e-14 * max |diagonal|.
  bool is_diagonal(double rel_tol = 1e-14) const {
    const double diag_scale = m_.diagonal().cwiseAbs().maxCoeff();
    for (Eigen::Index i = 0; i < dim(); ++i)
      for (Eigen::Index j = 0; j < dim(); ++j)
        if (i != j && std::abs(m_(i, j)) > rel_tol * diag_scale) return false;
    return true;
  }

  /// Principal submatrix with the listed rows and columns removed.
  SymMatrix without(std::span<const Eigen::Index> drop) const;

 private:
  Eigen::MatrixXd m_;
};

/// sigma_k over an arbitrary (unsorted) value list. Dynamic programming over
/// elements: e_j <- e_j + x * e_{j-1}, O(n k).
inline double sigma(std::span<const double> lambda, int k) {
  if (k < 0) throw ArgumentError("sigma: k must be >= 0, got " + std::to_string(k));
  const auto n = static_cast<int>(lambda.size());
  if (k == 0) return 1.0;
  if (k > n) return 0.0;
  std::vector<double> e(static_cast<std::size_t>(k) + 1, 0.0);
  e[0] = 1.0;
  for (int i = 0; i < n; ++i) {
    const double x = lambda[static_cast<std::size_t>(i)];
    for (int j = std::min(i + 1, k); j >= 1; --j) e[j] += x * e[j - 1];
  }
  return e[static_cast<std::size_t>(k)];
}

inline double sigma(const Spectrum& lambda, int k) { return sigma(lambda.values(), k); }

/// sigma_k(lambda | i): lambda with entry i set to zero.
inline double sigma_deleted(std::span<const double> lambda, int k, std::size_t i) {
  if (i >= lambda.size()) throw ArgumentError("sigma_deleted: index out of range");
  std::vector<double> rest(lambda.begin(), lambda.end());
  rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(i));
  return sigma(rest, k);
}

/// sigma_k(lambda | ij).
inline double sigma_deleted(std::span<const double> lambda, int k, std::size_t i,
                            std::size_t j) {
  if (i >= lambda.size() || j >= lambda.size() || i == j)
    throw ArgumentError("sigma_deleted: indices out of range or equal");
  std::vector<double> rest;
  rest.reserve(lambda.size());
  for (std::size_t a = 0; a < lambda.size(); ++a)
    if (a != i && a != j) rest.push_back(lambda[a]);
  return sigma(rest, k);
}

/// Eigenvalues of a symmetric matrix, descending.
inline Spectrum eigenvalues(const SymMatrix& w) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(w.matrix(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success)
    throw NumericError("eigenvalues: symmetric eigensolver did not converge");
  const Eigen::VectorXd& ev = solver.eigenvalues();
  return Spectrum(std::vector<double>(ev.data(), ev.data() + ev.size()));
}

inline double sigma_matrix(const SymMatrix& w, int k) {
  if (k < 0) throw ArgumentError("sigma_matrix: k must be >= 0");
  if (k == 0) return 1.0;
  if (k > w.dim()) return 0.0;
  return sigma(eigenvalues(w), k);
}

inline SymMatrix SymMatrix::without(std::span<const Eigen::Index> drop) const {
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < dim(); ++i)
    if (std::find(drop.begin(), drop.end(), i) == drop.end()) keep.push_back(i);
  if (keep.empty()) throw ArgumentError("SymMatrix::without: nothing left");
  Eigen::MatrixXd sub(keep.size(), keep.size());
  for (std::size_t a = 0; a < keep.size(); ++a)
    for (std::size_t b = 0; b < keep.size(); ++b) sub(a, b) = m_(keep[a], keep[b]);
  return SymMatrix(sub);
}

/// sigma_k(W | drop) for |drop| in {1, 2}.
inline double sigma_minor(const SymMatrix& w, int k, std::span<const Eigen::Index> drop) {
  if (drop.empty() || drop.size() > 2)
    throw ArgumentError("sigma_minor: drop set must have 1 or 2 indices");
  for (auto i : drop)
    if (i < 0 || i >= w.dim())
      throw ArgumentError("sigma_minor: drop index " + std::to_string(i) +
                          " out of range for dim " + std::to_string(w.dim()));
  if (drop.size() == 2 && drop[0] == drop[1])
    throw ArgumentError("sigma_minor: repeated drop index");
  if (k < 0) throw ArgumentError("sigma_minor: k must be >= 0");
  if (k == 0) return 1.0;
  const auto remaining = w.dim() - static_cast<Eigen::Index>(drop.size());
  if (k > remaining) return 0.0;
  return sigma_matrix(w.without(drop), k);
}

inline double sigma_minor(const SymMatrix& w, int k, std::initializer_list<Eigen::Index> drop) {
  return sigma_minor(w, k, std::span<const Eigen::Index>(drop.begin(), drop.size()));
}

namespace detail {
inline std::vector<double> checked_diagonal(const SymMatrix& w, const char* who) {
  if (!w.is_diagonal())
    throw PreconditionError(std::string(who) + ": matrix is not diagonal");
  std::vector<double> d(static_cast<std::size_t>(w.dim()));
  for (Eigen::Index i = 0; i < w.dim(); ++i) d[i] = w(i, i);
  return d;
}
}  // namespace detail

/// Gradient of sigma_m at a diagonal matrix: entry (i,i) = sigma_{m-1}(W|i),
/// zero off the diagonal.
inline SymMatrix sigma_grad_diag(const SymMatrix& w, int m) {
  if (m < 1) throw ArgumentError("sigma_grad_diag: m must be a positive integer");
  const auto d = detail::checked_diagonal(w, "sigma_grad_diag");
  std::vector<double> g(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) g[i] = sigma_deleted(d, m - 1, i);
  return SymMatrix::diagonal(g);
}

/// d^2 sigma_m / dW_ij dW_kl at a diagonal matrix, entries treated as
/// independent variables:
///   sigma_{m-2}(W|ik)  if i = j, k = l, i != k
///  -sigma_{m-2}(W|ik)  if i = l, j = k, i != j
///   0                  otherwise.
inline double sigma_hess_diag(const SymMatrix& w, int m, Eigen::Index i, Eigen::Index j,
                              Eigen::Index k, Eigen::Index l) {
  if (m < 1) throw ArgumentError("sigma_hess_diag: m must be a positive integer");
  const auto n = w.dim();
  for (auto idx : {i, j, k, l})
    if (idx < 0 || idx >= n) throw ArgumentError("sigma_hess_diag: index out of range");
  const auto d = detail::checked_diagonal(w, "sigma_hess_diag");
  if (m < 2) return 0.0;
  const auto ui = static_cast<std::size_t>(i);
  const auto uk = static_cast<std::size_t>(k);
  if (i == j && k == l && i != k) return sigma_deleted(d, m - 2, ui, uk);
  if (i == l && j == k && i != j) return -sigma_deleted(d, m - 2, ui, static_cast<std::size_t>(j));
  return 0.0;
}

/// Sign test for the closed Garding cone: sigma_j(lambda) >= -tol for j = 1..k.
inline bool in_gamma_k(std::span<const double> lambda, int k, double tol = 0.0) {
  for (int j = 1; j <= k; ++j)
    if (sigma(lambda, j) < -tol) return false;
  return true;
}

}  // namespace ranklab
