#pragma once

// Spacetime Hessians and the rank machinery around them.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "ranklab/errors.hpp"
#include "ranklab/parallel.hpp"
#include "ranklab/symm.hpp"

namespace ranklab {

inline constexpr double kDefaultRankTol = 1e-8;

/// The (n+1)x(n+1) block matrix [[D^2u, Du_t^T], [Du_t, u_tt]].
class SpacetimeHessian {
 public:
  SpacetimeHessian(SymMatrix spatial, Eigen::VectorXd mixed, double temporal)
      : spatial_(std::move(spatial)), mixed_(std::move(mixed)), temporal_(temporal) {
    if (mixed_.size() != spatial_.dim())
      throw ArgumentError("SpacetimeHessian: mixed length " + std::to_string(mixed_.size()) +
                          " does not match spatial dim " + std::to_string(spatial_.dim()));
  }

  Eigen::Index n() const { return spatial_.dim(); }
  const SymMatrix& spatial() const { return spatial_; }
  const Eigen::VectorXd& mixed() const { return mixed_; }
  double temporal() const { return temporal_; }

  SymMatrix materialize() const {
    const auto n = spatial_.dim();
    Eigen::MatrixXd m(n + 1, n + 1);
    m.topLeftCorner(n, n) = spatial_.matrix();
    m.block(0, n, n, 1) = mixed_;
    m.block(n, 0, 1, n) = mixed_.transpose();
    m(n, n) = temporal_;
    return SymMatrix(m);
  }

  /// max(0, -lambda_min) of the materialized matrix.
  double psd_defect() const { return std::max(0.0, -eigenvalues(materialize()).min()); }

 private:
  SymMatrix spatial_;
  Eigen::VectorXd mixed_;
  double temporal_;
};

inline SpacetimeHessian assemble(const SymMatrix& spatial, const Eigen::VectorXd& mixed,
                                 double temporal) {
  return SpacetimeHessian(spatial, mixed, temporal);
}

/// Orthogonal change of coordinates. When `good_count` is set, the rotation
/// only mixes coordinates [0, good_count) with the last one and fixes the
/// rest (the sparsity shape used when the spatial bad block vanishes).
class Rotation {
 public:
  explicit Rotation(Eigen::MatrixXd p, std::optional<Eigen::Index> good_count = std::nullopt)
      : p_(std::move(p)), good_count_(good_count) {
    if (p_.rows() != p_.cols()) throw ArgumentError("Rotation: matrix must be square");
    const double err =
        (p_.transpose() * p_ - Eigen::MatrixXd::Identity(p_.rows(), p_.cols())).cwiseAbs().maxCoeff();
    if (err > 1e-12)
      throw NumericError("Rotation: P^T P deviates from identity by " + std::to_string(err));
  }

  Eigen::Index dim() const { return p_.rows(); }
  const Eigen::MatrixXd& matrix() const { return p_; }
  std::optional<Eigen::Index> good_count() const { return good_count_; }
  bool structured() const { return good_count_.has_value(); }

  /// P^T W P.
  Eigen::MatrixXd conjugate(const Eigen::MatrixXd& w) const { return p_.transpose() * w * p_; }

 private:
  Eigen::MatrixXd p_;
  std::optional<Eigen::Index> good_count_;
};

/// Eigendecomposition with P^T W P = diag(lambda), lambda descending. Ties
/// keep the eigensolver's order.
inline std::pair<Spectrum, Rotation> spectral(const SymMatrix& w) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(w.matrix());
  if (solver.info() != Eigen::Success)
    throw NumericError("spectral: symmetric eigensolver did not converge");
  const auto n = w.dim();
  const Eigen::VectorXd& ev = solver.eigenvalues();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return ev(a) > ev(b); });
  Eigen::MatrixXd p(n, n);
  std::vector<double> values(static_cast<std::size_t>(n));
  for (Eigen::Index c = 0; c < n; ++c) {
    p.col(c) = solver.eigenvectors().col(order[c]);
    values[c] = ev(order[c]);
  }
  return {Spectrum(std::move(values)), Rotation(std::move(p))};
}

/// Count of eigenvalues strictly above tol * max(1, lambda_max).
inline int numerical_rank(const Spectrum& s, double tol = kDefaultRankTol) {
  if (!(tol > 0)) throw ArgumentError("numerical_rank: tol must be > 0");
  const double threshold = tol * std::max(1.0, s.max());
  int rank = 0;
  for (double v : s.values())
    if (v > threshold) ++rank;
  return rank;
}

inline int numerical_rank(const SymMatrix& w, double tol = kDefaultRankTol) {
  return numerical_rank(eigenvalues(w), tol);
}

/// Rotation diagonalizing W that mixes only spatial coordinates [0, l) with
/// time. Requires rows/columns l..n-1 of the materialized matrix to vanish
/// within tol * max(1, max|W|).
inline Rotation structured_rotation(const SpacetimeHessian& w, Eigen::Index l,
                                    double tol = 1e-10) {
  const auto n = w.n();
  if (l < 0 || l > n) throw ArgumentError("structured_rotation: l out of range");
  const Eigen::MatrixXd m = w.materialize().matrix();
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  for (Eigen::Index i = l; i < n; ++i)
    for (Eigen::Index j = 0; j <= n; ++j)
      if (std::abs(m(i, j)) > tol * scale) {
        std::ostringstream msg;
        msg << "structured_rotation: bad block entry (" << i << "," << j << ") = " << m(i, j)
            << " does not vanish";
        throw PreconditionError(msg.str());
      }

  // Eigendecomposition of the (good + time) block.
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < l; ++i) idx.push_back(i);
  idx.push_back(n);
  const auto b = static_cast<Eigen::Index>(idx.size());
  Eigen::MatrixXd block(b, b);
  for (Eigen::Index a = 0; a < b; ++a)
    for (Eigen::Index c = 0; c < b; ++c) block(a, c) = m(idx[a], idx[c]);
  auto [spec, rot] = spectral(SymMatrix(block));

  Eigen::MatrixXd p = Eigen::MatrixXd::Identity(n + 1, n + 1);
  for (Eigen::Index c = 0; c < b; ++c)
    for (Eigen::Index a = 0; a < b; ++a) p(idx[a], idx[c]) = rot.matrix()(a, c);
  return Rotation(std::move(p), l);
}

enum class CaseTag { Case1, Case2 };

inline const char* to_string(CaseTag tag) { return tag == CaseTag::Case1 ? "CASE1" : "CASE2"; }

struct CaseReport {
  int total_rank = 0;    // l
  int spatial_rank = 0;  // k
  CaseTag tag = CaseTag::Case2;
  /// u_tt - sum_{i<k} u_it^2 / u_ii in coordinates diagonalizing D^2u.
  double gap = 0.0;
  /// CASE2: |gap|. CASE1: max |u_it| over the spatial null directions.
  double residual = 0.0;
};

/// Rank dichotomy for a PSD spacetime Hessian. The spatial block is
/// diagonalized first; then either k = l-1 with a positive temporal Schur
/// gap (CASE1) or k = l with the gap vanishing (CASE2).
inline CaseReport classify_case(const SpacetimeHessian& w, double tol = kDefaultRankTol) {
  if (!(tol > 0)) throw ArgumentError("classify_case: tol must be > 0");
  const SymMatrix full = w.materialize();
  const Spectrum full_spec = eigenvalues(full);
  const double defect = std::max(0.0, -full_spec.min());
  if (defect > tol * std::max(1.0, full_spec.max())) {
    std::ostringstream msg;
    msg << "classify_case: psd defect " << defect << " exceeds tolerance";
    throw PreconditionError(msg.str());
  }

  auto [spatial_spec, rot] = spectral(w.spatial());
  const Eigen::VectorXd mixed = rot.matrix().transpose() * w.mixed();

  CaseReport r;
  r.total_rank = numerical_rank(full_spec, tol);
  r.spatial_rank = numerical_rank(spatial_spec, tol);
  const int l = r.total_rank;
  const int k = r.spatial_rank;
  if (k != l - 1 && k != l) {
    std::ostringstream msg;
    msg << "classify_case: spatial rank " << k << " not in {l-1, l} for total rank " << l;
    throw InconsistencyError(msg.str());
  }

  double gap = w.temporal();
  for (int i = 0; i < k; ++i) gap -= mixed(i) * mixed(i) / spatial_spec[i];
  r.gap = gap;
  if (k == l - 1) {
    r.tag = CaseTag::Case1;
    double bad = 0.0;
    for (Eigen::Index i = k; i < w.n(); ++i) bad = std::max(bad, std::abs(mixed(i)));
    r.residual = bad;
  } else {
    r.tag = CaseTag::Case2;
    r.residual = std::abs(gap);
  }
  return r;
}

/// sigma_{m+1} of the bordered matrix [[M, v], [v^T, s]] for diagonal M:
///   sigma_{m+1}(M) + s sigma_m(M) - sum_i v_i^2 sigma_{m-1}(M|i).
inline double bordered_sigma(const SymMatrix& m_diag, const Eigen::VectorXd& v, double s,
                             int m) {
  if (v.size() != m_diag.dim()) throw ArgumentError("bordered_sigma: dimension mismatch");
  if (m < 0) throw ArgumentError("bordered_sigma: m must be >= 0");
  if (!m_diag.is_diagonal()) throw PreconditionError("bordered_sigma: M is not diagonal");
  std::vector<double> d(static_cast<std::size_t>(m_diag.dim()));
  for (Eigen::Index i = 0; i < m_diag.dim(); ++i) d[i] = m_diag(i, i);
  double value = sigma(d, m + 1) + s * sigma(d, m);
  if (m >= 1)
    for (std::size_t i = 0; i < d.size(); ++i) value -= v(i) * v(i) * sigma_deleted(d, m - 1, i);
  return value;
}

namespace detail {
inline void check_inverse_bound_inputs(const SpacetimeHessian& w, Eigen::Index l, double eps,
                                       const char* who) {
  if (!(eps > 0)) throw ArgumentError(std::string(who) + ": eps must be > 0");
  if (l < 0 || l > w.n()) throw ArgumentError(std::string(who) + ": l out of range");
  if (!w.spatial().is_diagonal())
    throw PreconditionError(std::string(who) + ": spatial block must be diagonal");
  for (Eigen::Index i = 0; i < l; ++i)
    if (!(w.spatial()(i, i) > 0))
      throw PreconditionError(std::string(who) + ": good diagonal entry is not positive");
}
}  // namespace detail

/// C = u_tt + eps - sum_{i<l} u_it^2 / (u_ii + eps): the Schur complement of
/// the regularized good block.
inline double regularized_schur_gap(const SpacetimeHessian& w, Eigen::Index l, double eps) {
  detail::check_inverse_bound_inputs(w, l, eps, "regularized_schur_gap");
  double c = w.temporal() + eps;
  for (Eigen::Index i = 0; i < l; ++i)
    c -= w.mixed()(i) * w.mixed()(i) / (w.spatial()(i, i) + eps);
  return c;
}

/// Closed-form inverse of W + eps I as diagonal plus rank-one correction:
///   diag(1/(u_ii+eps) for i<l, 1/eps for l<=i<n, 0) + w w^T / C,
///   w = (-u_it/(u_ii+eps) for i<l, 0, ..., 0, 1).
/// Exact only when the bad mixed entries u_it (i >= l) and bad diagonal
/// entries vanish.
inline Eigen::MatrixXd regularized_inverse_rank_one(const SpacetimeHessian& w, Eigen::Index l,
                                                    double eps) {
  const double c = regularized_schur_gap(w, l, eps);
  if (!(c > 0)) throw NumericError("regularized_inverse_rank_one: Schur gap is not positive");
  const auto n = w.n();
  Eigen::VectorXd d = Eigen::VectorXd::Zero(n + 1);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(n + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i < l) {
      d(i) = 1.0 / (w.spatial()(i, i) + eps);
      u(i) = -w.mixed()(i) / (w.spatial()(i, i) + eps);
    } else {
      d(i) = 1.0 / eps;
    }
  }
  u(n) = 1.0;
  return Eigen::MatrixXd(d.asDiagonal()) + u * u.transpose() / c;
}

/// lambda_min of (W + eps I)^{-1} - diag(1/(u_ii+eps) for i<l, 0 elsewhere),
/// both sides formed densely. A value >= -1e-10 certifies the lower bound.
inline double inverse_lower_bound_check(const SpacetimeHessian& w, Eigen::Index l, double eps) {
  detail::check_inverse_bound_inputs(w, l, eps, "inverse_lower_bound_check");
  const auto n = w.n();
  const Eigen::MatrixXd reg =
      w.materialize().matrix() + eps * Eigen::MatrixXd::Identity(n + 1, n + 1);
  Eigen::LLT<Eigen::MatrixXd> llt(reg);
  if (llt.info() != Eigen::Success)
    throw NumericError("inverse_lower_bound_check: regularized matrix is not positive definite");
  Eigen::MatrixXd lhs = llt.solve(Eigen::MatrixXd::Identity(n + 1, n + 1));
  lhs = 0.5 * (lhs + lhs.transpose());
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + 1, n + 1);
  for (Eigen::Index i = 0; i < l; ++i) rhs(i, i) = 1.0 / (w.spatial()(i, i) + eps);
  return eigenvalues(SymMatrix(Eigen::MatrixXd(lhs - rhs))).min();
}

/// Matrix field sampled on a uniform tensor grid, row-major with the last
/// axis fastest.
struct SampledMatrixField {
  std::vector<int> dims;
  std::vector<double> spacing;
  std::vector<SymMatrix> samples;

  std::size_t point_count() const {
    std::size_t c = 1;
    for (int d : dims) c *= static_cast<std::size_t>(d);
    return c;
  }
};

/// sup over interior points (at least `margin` from every face) and index
/// pairs of |grad W_ij| / max((W_ii W_jj)^{1/4}, 1e-14), with central
/// differences for the gradient.
inline double quarter_ratio(const SampledMatrixField& field, int margin = 1,
                            double psd_tol = 1e-10) {
  const auto axes = field.dims.size();
  if (axes == 0 || field.spacing.size() != axes)
    throw ArgumentError("quarter_ratio: dims/spacing mismatch");
  if (field.samples.size() != field.point_count())
    throw ArgumentError("quarter_ratio: sample count does not match grid");
  if (margin < 1) throw ArgumentError("quarter_ratio: margin must be >= 1");
  const auto dim = field.samples.front().dim();

  std::vector<double> defects(field.samples.size());
  parallel::for_each_index(field.samples.size(), [&](std::size_t p) {
    if (field.samples[p].dim() != dim) throw ArgumentError("quarter_ratio: mixed matrix sizes");
    const Spectrum s = eigenvalues(field.samples[p]);
    defects[p] = std::max(0.0, -s.min()) / std::max(1.0, s.max());
  });
  for (std::size_t p = 0; p < defects.size(); ++p)
    if (defects[p] > psd_tol)
      throw PreconditionError("quarter_ratio: sample " + std::to_string(p) + " is not PSD");

  std::vector<std::size_t> stride(axes, 1);
  for (std::size_t a = axes - 1; a-- > 0;) stride[a] = stride[a + 1] * field.dims[a + 1];

  std::vector<double> point_sup(field.samples.size(), 0.0);
  parallel::for_each_index(field.samples.size(), [&](std::size_t p) {
    std::vector<int> coord(axes);
    std::size_t rem = p;
    for (std::size_t a = 0; a < axes; ++a) {
      coord[a] = static_cast<int>(rem / stride[a]);
      rem %= stride[a];
      if (coord[a] < margin || coord[a] >= field.dims[a] - margin) return;
    }
    const Eigen::MatrixXd& w = field.samples[p].matrix();
    double best = 0.0;
    for (Eigen::Index i = 0; i < dim; ++i)
      for (Eigen::Index j = 0; j < dim; ++j) {
        double grad2 = 0.0;
        for (std::size_t a = 0; a < axes; ++a) {
          const double g = (field.samples[p + stride[a]](i, j) - field.samples[p - stride[a]](i, j)) /
                           (2.0 * field.spacing[a]);
          grad2 += g * g;
        }
        const double denom =
            std::max(std::pow(std::max(0.0, w(i, i) * w(j, j)), 0.25), 1e-14);
        best = std::max(best, std::sqrt(grad2) / denom);
      }
    point_sup[p] = best;
  });
  double sup = 0.0;
  for (double v : point_sup) sup = std::max(sup, v);
  return sup;
}

}  // namespace ranklab
