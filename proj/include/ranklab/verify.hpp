#pragma once

// Test functions, rank timelines, CASE residuals and the differential
// inequality residual on discrete spacetime-Hessian fields.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ranklab/errors.hpp"
#include "ranklab/matrixkit.hpp"
#include "ranklab/operators.hpp"
#include "ranklab/parallel.hpp"
#include "ranklab/pde.hpp"
#include "ranklab/symm.hpp"

namespace ranklab {

enum class PhiVariant { Simple, BianGuan };

inline const char* to_string(PhiVariant v) { return v == PhiVariant::Simple ? "simple" : "bian_guan"; }

inline PhiVariant parse_phi_variant(const std::string& s) {
  if (s == "simple") return PhiVariant::Simple;
  if (s == "bian_guan") return PhiVariant::BianGuan;
  throw ConfigError("unknown phi variant '" + s + "' (expected simple or bian_guan)");
}

namespace detail {

/// sigma_k of a symmetric matrix, read straight off the diagonal when the
/// stored off-diagonal entries are exactly zero.
inline double sigma_sym(const SymMatrix& w, int k) {
  if (w.is_diagonal(0.0)) {
    std::vector<double> d(static_cast<std::size_t>(w.dim()));
    for (Eigen::Index i = 0; i < w.dim(); ++i) d[i] = w(i, i);
    return sigma(d, k);
  }
  return sigma_matrix(w, k);
}

inline std::string describe_point(const GridSpec& g, std::size_t frame, std::size_t p) {
  std::ostringstream os;
  os << "frame " << frame << ", point " << p << " (x = ";
  const auto x = g.position(p);
  for (Eigen::Index a = 0; a < x.size(); ++a) os << (a ? ", " : "") << x(a);
  os << ")";
  return os.str();
}

}  // namespace detail

/// Zero-branch threshold of q: sigma_{l+1} <= 1e-10 (1 + |sigma_l|).
inline double q_zero_threshold(double sigma_l) { return 1e-10 * (1.0 + std::abs(sigma_l)); }

/// q(W) = sigma_{l+2}(W) / sigma_{l+1}(W), or 0 on the zero branch.
inline double q_function(const SymMatrix& w, int l) {
  const double s1 = detail::sigma_sym(w, l + 1);
  if (s1 <= q_zero_threshold(detail::sigma_sym(w, l))) return 0.0;
  return detail::sigma_sym(w, l + 2) / s1;
}

/// simple: sigma_{l+1} of the full spacetime Hessian.
/// bian_guan: sigma_{l+1}(D^2u) + q(D^2u) on the spatial block.
inline double phi_value(const SpacetimeHessian& w, int l, PhiVariant variant) {
  if (l < 0 || l > w.n())
    throw ArgumentError("phi: l = " + std::to_string(l) + " outside [0, " + std::to_string(w.n()) + "]");
  if (variant == PhiVariant::Simple) return detail::sigma_sym(w.materialize(), l + 1);
  return detail::sigma_sym(w.spatial(), l + 1) + q_function(w.spatial(), l);
}

struct PhiField {
  PhiVariant variant = PhiVariant::Simple;
  int l = 0;
  std::vector<double> values;  // aligned with HessianField::points
};

inline PhiField phi_field(const HessianField& hf, int l, PhiVariant variant) {
  PhiField out{variant, l, std::vector<double>(hf.hessians.size())};
  if (!hf.hessians.empty() && (l < 0 || l > hf.hessians.front().n()))
    throw ArgumentError("phi_field: l out of range");
  parallel::for_each_index(hf.hessians.size(),
                           [&](std::size_t i) { out.values[i] = phi_value(hf.hessians[i], l, variant); });
  return out;
}

struct RankTimeline {
  std::vector<std::size_t> frames;         // frame indices covered (1..F-2)
  std::vector<int> l_per_frame;            // minimal interior rank l(t)
  std::vector<bool> constancy;             // all interior ranks equal l(t)
  std::vector<std::vector<int>> ranks;     // per frame, aligned with points
  std::vector<std::size_t> points;
  bool monotone = true;                    // l nondecreasing in frame index

  bool all_constant() const {
    return std::all_of(constancy.begin(), constancy.end(), [](bool b) { return b; });
  }
  int min_rank() const { return *std::min_element(l_per_frame.begin(), l_per_frame.end()); }
};

inline std::vector<int> rank_map(const HessianField& hf, double tol) {
  std::vector<int> r(hf.hessians.size());
  parallel::for_each_index(hf.hessians.size(),
                           [&](std::size_t i) { r[i] = numerical_rank(hf.hessians[i].materialize(), tol); });
  return r;
}

/// Frames first_frame..F-2; first_frame >= 1 lets callers skip a start-up layer.
inline RankTimeline rank_timeline(const SolutionField& sol, double tol = kDefaultRankTol, int margin = 2,
                                  std::size_t first_frame = 1) {
  if (sol.frame_count() < 3) throw ArgumentError("rank_timeline: need at least 3 frames");
  first_frame = std::max<std::size_t>(first_frame, 1);
  if (first_frame + 1 >= sol.frame_count()) throw ArgumentError("rank_timeline: first_frame leaves no frames");
  RankTimeline tl;
  for (std::size_t m = first_frame; m + 1 < sol.frame_count(); ++m) {
    const HessianField hf = hessian_field(sol, m, margin);
    if (hf.points.empty()) throw ArgumentError("rank_timeline: no interior points at this margin");
    auto ranks = rank_map(hf, tol);
    const int l = *std::min_element(ranks.begin(), ranks.end());
    const bool constant = std::all_of(ranks.begin(), ranks.end(), [l](int r) { return r == l; });
    if (!tl.l_per_frame.empty() && l < tl.l_per_frame.back()) tl.monotone = false;
    tl.frames.push_back(m);
    tl.l_per_frame.push_back(l);
    tl.constancy.push_back(constant);
    if (tl.points.empty()) tl.points = hf.points;
    tl.ranks.push_back(std::move(ranks));
  }
  return tl;
}

struct CaseSummary {
  std::size_t case1 = 0;
  std::size_t case2 = 0;
  double max_case2_residual = 0.0;
  double min_case1_gap = std::numeric_limits<double>::infinity();
  std::vector<CaseReport> reports;  // aligned with HessianField::points
};

/// classify_case at every point; a failure carries the point's coordinates.
inline CaseSummary case_residuals(const HessianField& hf, const GridSpec& grid, double tol = kDefaultRankTol) {
  CaseSummary s;
  s.reports.resize(hf.hessians.size());
  parallel::for_each_index(hf.hessians.size(), [&](std::size_t i) {
    try {
      s.reports[i] = classify_case(hf.hessians[i], tol);
    } catch (const InconsistencyError& e) {
      throw InconsistencyError(std::string(e.what()) + " at " + detail::describe_point(grid, hf.frame, hf.points[i]));
    } catch (const PreconditionError& e) {
      throw PreconditionError(std::string(e.what()) + " at " + detail::describe_point(grid, hf.frame, hf.points[i]));
    }
  });
  for (const auto& r : s.reports) {
    if (r.tag == CaseTag::Case1) {
      ++s.case1;
      s.min_case1_gap = std::min(s.min_case1_gap, r.gap);
    } else {
      ++s.case2;
      s.max_case2_residual = std::max(s.max_case2_residual, r.residual);
    }
  }
  return s;
}

/// sup over points of max(0, -lambda_min).
inline double psd_monitor(const HessianField& hf) {
  std::vector<double> d(hf.hessians.size());
  parallel::for_each_index(hf.hessians.size(), [&](std::size_t i) { d[i] = hf.hessians[i].psd_defect(); });
  double sup = 0.0;
  for (double v : d) sup = std::max(sup, v);
  return sup;
}

/// max over points of |sigma_{l+1}(full) - bordered expansion| / scale, with
/// the spatial block rotated to diagonal first; scale = max(1, |W|_max)^{l+1}.
inline double bordered_consistency(const HessianField& hf, int l) {
  std::vector<double> err(hf.hessians.size());
  parallel::for_each_index(hf.hessians.size(), [&](std::size_t i) {
    const auto& w = hf.hessians[i];
    auto [spec, rot] = spectral(w.spatial());
    const SymMatrix diag = SymMatrix::diagonal(spec.values());
    const Eigen::VectorXd v = rot.matrix().transpose() * w.mixed();
    const SymMatrix full = w.materialize();
    const double expected = sigma_matrix(full, l + 1);
    const double got = bordered_sigma(diag, v, w.temporal(), l);
    const double scale = std::pow(std::max(1.0, full.matrix().cwiseAbs().maxCoeff()), l + 1);
    err[i] = std::abs(expected - got) / scale;
  });
  double sup = 0.0;
  for (double v : err) sup = std::max(sup, v);
  return sup;
}

/// Per frame and point: LHS = sum F^{ij} phi_ij - phi_t and the ratio
/// LHS / (phi + |grad phi| + floor). Entries are empty where the stencil is
/// unavailable (first covered frame, outer ring of the phi region).
struct ResidualReport {
  static constexpr double kFloor = 1e-12;
  int l = 0;
  PhiVariant variant = PhiVariant::Simple;
  std::vector<std::size_t> frames;                         // frames covered by phi
  std::vector<std::size_t> points;                         // phi points (margin)
  std::vector<std::vector<double>> phi;                    // [frame][point]
  std::vector<std::vector<std::optional<double>>> lhs;     // [frame][point]
  std::vector<std::vector<std::optional<double>>> ratio;   // [frame][point]
  double sup_lhs = 0.0;
  double sup_abs_lhs = 0.0;
  double sup_ratio = 0.0;
  double sup_abs_phi = 0.0;
  std::size_t evaluated = 0;
};

inline ResidualReport diff_inequality(const SolutionField& sol, const OperatorSpec& spec, int l,
                                      PhiVariant variant, int margin = 2, std::size_t first_frame = 1) {
  first_frame = std::max<std::size_t>(first_frame, 1);
  if (first_frame + 2 >= sol.frame_count())
    throw ArgumentError("diff_inequality: need at least two phi frames");
  const GridSpec& g = sol.grid;
  const auto stride = g.strides();
  ResidualReport r;
  r.l = l;
  r.variant = variant;
  r.points = g.interior_points(margin);
  if (r.points.empty()) throw ArgumentError("diff_inequality: no interior points at this margin");

  // Map from flat grid index to position in r.points.
  std::vector<long> slot(g.point_count(), -1);
  for (std::size_t i = 0; i < r.points.size(); ++i) slot[r.points[i]] = static_cast<long>(i);

  for (std::size_t m = first_frame; m + 1 < sol.frame_count(); ++m) {
    r.frames.push_back(m);
    r.phi.push_back(phi_field(hessian_field(sol, m, margin), l, variant).values);
  }
  for (double v : r.phi.front()) r.sup_abs_phi = std::max(r.sup_abs_phi, std::abs(v));

  r.lhs.assign(r.frames.size(), std::vector<std::optional<double>>(r.points.size()));
  r.ratio.assign(r.frames.size(), std::vector<std::optional<double>>(r.points.size()));
  bool any = false;
  r.sup_lhs = -std::numeric_limits<double>::infinity();
  r.sup_ratio = -std::numeric_limits<double>::infinity();
  for (std::size_t f = 1; f < r.frames.size(); ++f) {
    const std::size_t m = r.frames[f];
    const auto& phi = r.phi[f];
    const auto& phi_prev = r.phi[f - 1];
    for (double v : phi) r.sup_abs_phi = std::max(r.sup_abs_phi, std::abs(v));
    const auto& u = sol.frames[m];
    const double t = sol.time(m);
    parallel::for_each_index(r.points.size(), [&](std::size_t i) {
      const std::size_t p = r.points[i];
      if (!g.interior(p, margin + 1)) return;
      Eigen::MatrixXd d2u;
      Eigen::VectorXd du;
      detail::spatial_derivatives(g, stride, u, p, d2u, du);
      const OperatorPoint pt{SymMatrix(d2u), du, u[p], g.position(p), t};
      const Eigen::MatrixXd fa = grad_A(spec, pt);

      auto at = [&](long off) { return phi[static_cast<std::size_t>(slot[static_cast<std::size_t>(static_cast<long>(p) + off)])]; };
      double op = 0.0;
      double grad2 = 0.0;
      for (int a = 0; a < g.n; ++a) {
        const long sa = static_cast<long>(stride[a]);
        const double ha = g.h(a);
        op += fa(a, a) * (at(sa) - 2 * phi[i] + at(-sa)) / (ha * ha);
        const double ga = (at(sa) - at(-sa)) / (2 * ha);
        grad2 += ga * ga;
        for (int b = a + 1; b < g.n; ++b) {
          const long sb = static_cast<long>(stride[b]);
          const double mixed = (at(sa + sb) - at(sa - sb) - at(-sa + sb) + at(-sa - sb)) / (4 * ha * g.h(b));
          op += 2 * fa(a, b) * mixed;
        }
      }
      const double phi_t = (phi[i] - phi_prev[i]) / g.dt;
      const double lhs = op - phi_t + 0.0;
      r.lhs[f][i] = lhs;
      r.ratio[f][i] = lhs / (std::abs(phi[i]) + std::sqrt(grad2) + ResidualReport::kFloor) + 0.0;
    });
    for (std::size_t i = 0; i < r.points.size(); ++i) {
      if (!r.lhs[f][i]) continue;
      any = true;
      ++r.evaluated;
      r.sup_lhs = std::max(r.sup_lhs, *r.lhs[f][i]);
      r.sup_abs_lhs = std::max(r.sup_abs_lhs, std::abs(*r.lhs[f][i]));
      r.sup_ratio = std::max(r.sup_ratio, *r.ratio[f][i]);
    }
  }
  if (!any) throw ArgumentError("diff_inequality: grid too small for the phi stencil");
  return r;
}

}  // namespace ranklab
