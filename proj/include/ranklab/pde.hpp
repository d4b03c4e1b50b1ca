#pragma once

// Uniform-grid parabolic flows u_t = F(D^2u, Du, u, x, t) on boxes: closed
// forms of the heat equation, an explicit Euler solver, spacetime-Hessian
// extraction, and binary/CSV serialization.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "ranklab/errors.hpp"
#include "ranklab/matrixkit.hpp"
#include "ranklab/operators.hpp"
#include "ranklab/parallel.hpp"
#include "ranklab/symm.hpp"

namespace ranklab {

struct GridSpec {
  int n = 1;
  std::vector<double> lo;
  std::vector<double> hi;
  std::vector<int> points;
  double dt = 0.0;
  double t0 = 0.0;
  double t1 = 0.0;

  /// Same box, point count and horizon on every axis.
  static GridSpec cube(int n, double lo, double hi, int points, double dt, double t0, double t1) {
    GridSpec g{n,  std::vector<double>(n, lo), std::vector<double>(n, hi), std::vector<int>(n, points),
               dt, t0, t1};
    g.validate();
    return g;
  }

  void validate() const {
    if (n < 1 || n > 3) throw ConfigError("grid: n must be in 1..3");
    if (static_cast<int>(lo.size()) != n || static_cast<int>(hi.size()) != n ||
        static_cast<int>(points.size()) != n)
      throw ConfigError("grid: lo, hi and points need one entry per axis");
    for (int a = 0; a < n; ++a) {
      if (!(hi[a] > lo[a])) throw ConfigError("grid: hi must exceed lo on every axis");
      if (points[a] < 8 || points[a] > 257) throw ConfigError("grid: points per axis must be in 8..257");
    }
    if (!(dt > 0)) throw ConfigError("grid: dt must be > 0");
    if (!(t1 > t0)) throw ConfigError("grid: t1 must exceed t0");
  }

  double h(int axis) const { return (hi[axis] - lo[axis]) / (points[axis] - 1); }

  std::size_t frame_count() const {
    return static_cast<std::size_t>(std::floor((t1 - t0) / dt + 1e-9)) + 1;
  }
  double time(std::size_t frame) const { return t0 + static_cast<double>(frame) * dt; }

  std::size_t point_count() const {
    std::size_t c = 1;
    for (int p : points) c *= static_cast<std::size_t>(p);
    return c;
  }

  /// Row-major strides, last axis fastest.
  std::vector<std::size_t> strides() const {
    std::vector<std::size_t> s(static_cast<std::size_t>(n), 1);
    for (int a = n - 2; a >= 0; --a) s[a] = s[a + 1] * static_cast<std::size_t>(points[a + 1]);
    return s;
  }

  std::vector<int> coords(std::size_t index) const {
    std::vector<int> c(static_cast<std::size_t>(n));
    for (int a = n - 1; a >= 0; --a) {
      c[a] = static_cast<int>(index % static_cast<std::size_t>(points[a]));
      index /= static_cast<std::size_t>(points[a]);
    }
    return c;
  }

  Eigen::VectorXd position(std::size_t index) const {
    const auto c = coords(index);
    Eigen::VectorXd x(n);
    for (int a = 0; a < n; ++a) x(a) = lo[a] + c[a] * h(a);
    return x;
  }

  /// At least `margin` points away from every face.
  bool interior(std::size_t index, int margin) const {
    const auto c = coords(index);
    for (int a = 0; a < n; ++a)
      if (c[a] < margin || c[a] > points[a] - 1 - margin) return false;
    return true;
  }

  std::vector<std::size_t> interior_points(int margin) const {
    std::vector<std::size_t> out;
    for (std::size_t p = 0; p < point_count(); ++p)
      if (interior(p, margin)) out.push_back(p);
    return out;
  }

  bool same_shape(const GridSpec& o) const {
    return n == o.n && points == o.points && dt == o.dt && t0 == o.t0;
  }
};

struct SolutionField {
  GridSpec grid;
  std::vector<std::vector<double>> frames;

  std::size_t frame_count() const { return frames.size(); }
  double time(std::size_t m) const { return grid.time(m); }
};

/// Samples fn(x, t) at every grid point of one frame.
inline std::vector<double> sample_frame(const GridSpec& grid, double t,
                                        const std::function<double(const Eigen::VectorXd&, double)>& fn) {
  std::vector<double> out(grid.point_count());
  for (std::size_t p = 0; p < out.size(); ++p) out[p] = fn(grid.position(p), t);
  return out;
}

/// u = exp(a.x + |a|^2 t).
struct ExpWave {
  Eigen::VectorXd a;
};

/// u = x^T Q x / 2 + b.x + c + tr(Q) t, Q PSD.
struct QuadraticDrift {
  Eigen::MatrixXd Q;
  Eigen::VectorXd b;
  double c = 0.0;
};

/// Sum of closed-form heat solutions; the sum solves the heat equation too.
struct ExactSolution {
  std::vector<std::variant<ExpWave, QuadraticDrift>> terms;

  void validate(int n) const {
    if (terms.empty()) throw ArgumentError("exact_solution: no terms");
    for (const auto& term : terms) {
      if (const auto* w = std::get_if<ExpWave>(&term)) {
        if (w->a.size() != n) throw ArgumentError("exp_wave: a must have length n");
      } else {
        const auto& q = std::get<QuadraticDrift>(term);
        if (q.Q.rows() != n || q.Q.cols() != n || q.b.size() != n)
          throw ArgumentError("quadratic_drift: Q must be n x n and b length n");
        const SymMatrix qs(q.Q);
        const Spectrum s = eigenvalues(qs);
        if (s.min() < -1e-12 * std::max(1.0, s.max()))
          throw ArgumentError("quadratic_drift: Q must be positive semidefinite");
      }
    }
  }

  double operator()(const Eigen::VectorXd& x, double t) const {
    double u = 0.0;
    for (const auto& term : terms) {
      if (const auto* w = std::get_if<ExpWave>(&term)) {
        u += std::exp(w->a.dot(x) + w->a.squaredNorm() * t);
      } else {
        const auto& q = std::get<QuadraticDrift>(term);
        u += 0.5 * x.dot(q.Q * x) + q.b.dot(x) + q.c + q.Q.trace() * t;
      }
    }
    return u;
  }
};

inline SolutionField exact_solution(const ExactSolution& sol, const GridSpec& grid) {
  grid.validate();
  sol.validate(grid.n);
  SolutionField out{grid, {}};
  out.frames.resize(grid.frame_count());
  parallel::for_each_index(out.frames.size(), [&](std::size_t m) {
    out.frames[m] = sample_frame(grid, grid.time(m), sol);
  });
  return out;
}

inline SolutionField exact_solution(const ExpWave& w, const GridSpec& grid) {
  return exact_solution(ExactSolution{{w}}, grid);
}
inline SolutionField exact_solution(const QuadraticDrift& q, const GridSpec& grid) {
  return exact_solution(ExactSolution{{q}}, grid);
}

struct BoundarySpec {
  enum class Kind { Exact, Frozen };
  Kind kind = Kind::Frozen;
  std::function<double(const Eigen::VectorXd&, double)> sampler;  // required for Exact

  static BoundarySpec frozen() { return {}; }
  static BoundarySpec exact(std::function<double(const Eigen::VectorXd&, double)> f) {
    return {Kind::Exact, std::move(f)};
  }
};

namespace detail {

/// Central-difference D^2u and Du at an interior point of one frame.
inline void spatial_derivatives(const GridSpec& g, const std::vector<std::size_t>& stride,
                                const std::vector<double>& u, std::size_t p, Eigen::MatrixXd& d2,
                                Eigen::VectorXd& d1) {
  const int n = g.n;
  d2.resize(n, n);
  d1.resize(n);
  for (int a = 0; a < n; ++a) {
    const double ha = g.h(a);
    const std::size_t sa = stride[a];
    d1(a) = (u[p + sa] - u[p - sa]) / (2 * ha);
    d2(a, a) = (u[p + sa] - 2 * u[p] + u[p - sa]) / (ha * ha);
    for (int b = a + 1; b < n; ++b) {
      const double hb = g.h(b);
      const std::size_t sb = stride[b];
      const double v =
          (u[p + sa + sb] - u[p + sa - sb] - u[p - sa + sb] + u[p - sa - sb]) / (4 * ha * hb);
      d2(a, b) = v;
      d2(b, a) = v;
    }
  }
}

inline double inverse_h2_sum(const GridSpec& g) {
  double s = 0.0;
  for (int a = 0; a < g.n; ++a) s += 1.0 / (g.h(a) * g.h(a));
  return s;
}

}  // namespace detail

/// Explicit Euler dt bound 1 / (2 lambda_max(F_A) sum_i h_i^-2); for the
/// heat operator this is h^2 / (2n) on a uniform cube.
inline double stability_bound(const GridSpec& g, double lambda_max) {
  if (!(lambda_max > 0)) return std::numeric_limits<double>::infinity();
  return 1.0 / (2.0 * lambda_max * detail::inverse_h2_sum(g));
}

/// Forward Euler u^{m+1} = u^m + dt F(D^2u^m, Du^m, u^m, x, t_m) on the
/// interior; boundary values from the exact sampler or held at u0.
inline SolutionField solve(const OperatorSpec& spec, const std::vector<double>& u0, const GridSpec& grid,
                           const BoundarySpec& boundary) {
  grid.validate();
  if (u0.size() != grid.point_count())
    throw ArgumentError("solve: initial frame has " + std::to_string(u0.size()) + " values, grid has " +
                        std::to_string(grid.point_count()));
  for (double v : u0)
    if (!std::isfinite(v)) throw ArgumentError("solve: initial frame is not finite");
  if (boundary.kind == BoundarySpec::Kind::Exact && !boundary.sampler)
    throw ArgumentError("solve: exact boundary needs a sampler");

  const int n = grid.n;
  const auto stride = grid.strides();
  const auto interior = grid.interior_points(1);
  std::vector<std::size_t> faces;
  for (std::size_t p = 0; p < grid.point_count(); ++p)
    if (!grid.interior(p, 1)) faces.push_back(p);
  std::vector<Eigen::VectorXd> pos(grid.point_count());
  for (std::size_t p = 0; p < pos.size(); ++p) pos[p] = grid.position(p);

  auto check_dt = [&](double lambda_max, std::size_t frame) {
    const double bound = stability_bound(grid, lambda_max);
    if (grid.dt > bound * (1 + 1e-12)) {
      std::ostringstream msg;
      msg << std::setprecision(15) << "solve: dt = " << grid.dt << " exceeds the stability bound "
          << bound << " at frame " << frame;
      throw ConfigError(msg.str());
    }
  };
  if (const auto* op = std::get_if<LinearOp>(&spec.kind())) {
    if (op->coeff.rows() != n) throw ArgumentError("solve: operator dimension does not match grid");
    check_dt(eigenvalues(SymMatrix(op->coeff)).max(), 0);
  }

  SolutionField sol{grid, {}};
  const std::size_t frames = grid.frame_count();
  sol.frames.reserve(frames);
  sol.frames.push_back(u0);

  std::vector<double> rhs(interior.size());
  std::vector<double> lam(interior.size());
  for (std::size_t m = 0; m + 1 < frames; ++m) {
    const std::vector<double>& u = sol.frames.back();
    const double t = grid.time(m);
    const bool nonlinear = !spec.is_linear();
    parallel::for_each_index(interior.size(), [&](std::size_t i) {
      const std::size_t p = interior[i];
      Eigen::MatrixXd d2;
      Eigen::VectorXd d1;
      detail::spatial_derivatives(grid, stride, u, p, d2, d1);
      OperatorPoint pt{SymMatrix(d2), d1, u[p], pos[p], t};
      rhs[i] = value(spec, pt, false);
      lam[i] = 0.0;
      if (!std::isfinite(rhs[i]) || !nonlinear) return;
      const Eigen::MatrixXd fa = grad_A(spec, pt);
      if (!fa.allFinite()) {
        rhs[i] = std::numeric_limits<double>::quiet_NaN();
        return;
      }
      lam[i] = eigenvalues(SymMatrix(fa)).max();
    });
    for (double r : rhs)
      if (!std::isfinite(r))
        throw DivergenceError("solve: non-finite right-hand side at frame " + std::to_string(m + 1),
                              static_cast<long>(m + 1));
    if (nonlinear) {
      double lmax = 0.0;
      for (double v : lam) lmax = std::max(lmax, v);
      check_dt(lmax, m);
    }

    std::vector<double> next(u.size());
    const double t_next = grid.time(m + 1);
    for (std::size_t i = 0; i < interior.size(); ++i) {
      const std::size_t p = interior[i];
      next[p] = u[p] + grid.dt * rhs[i];
    }
    for (std::size_t p : faces)
      next[p] = boundary.kind == BoundarySpec::Kind::Exact ? boundary.sampler(pos[p], t_next) : u0[p];
    for (std::size_t p = 0; p < next.size(); ++p)
      if (!std::isfinite(next[p]))
        throw DivergenceError("solve: non-finite value at frame " + std::to_string(m + 1),
                              static_cast<long>(m + 1));
    sol.frames.push_back(std::move(next));
  }
  return sol;
}

struct HessianField {
  std::size_t frame = 0;
  int margin = 1;
  std::vector<std::size_t> points;  // flat grid indices
  std::vector<SpacetimeHessian> hessians;
};

/// Spacetime Hessians at frame m on points at least `margin` from the faces:
/// central differences in space, (m+1, m-1) mixed differences and a
/// three-level second difference in time.
inline HessianField hessian_field(const SolutionField& sol, std::size_t m, int margin = 1) {
  if (m < 1 || m + 1 >= sol.frame_count())
    throw ArgumentError("hessian_field: frame " + std::to_string(m) + " needs neighbors in 1.." +
                        std::to_string(static_cast<long>(sol.frame_count()) - 2));
  if (margin < 1) throw ArgumentError("hessian_field: margin must be >= 1");
  const GridSpec& g = sol.grid;
  const auto stride = g.strides();
  const auto& up = sol.frames[m + 1];
  const auto& u = sol.frames[m];
  const auto& um = sol.frames[m - 1];
  const double dt = g.dt;

  HessianField hf;
  hf.frame = m;
  hf.margin = margin;
  hf.points = g.interior_points(margin);
  std::vector<std::optional<SpacetimeHessian>> slots(hf.points.size());
  parallel::for_each_index(hf.points.size(), [&](std::size_t i) {
    const std::size_t p = hf.points[i];
    Eigen::MatrixXd d2;
    Eigen::VectorXd d1;
    detail::spatial_derivatives(g, stride, u, p, d2, d1);
    Eigen::VectorXd mixed(g.n);
    for (int a = 0; a < g.n; ++a) {
      const std::size_t s = stride[a];
      mixed(a) = (up[p + s] - up[p - s] - um[p + s] + um[p - s]) / (4 * g.h(a) * dt);
    }
    const double utt = (up[p] - 2 * u[p] + um[p]) / (dt * dt);
    slots[i].emplace(SymMatrix(d2), mixed, utt);
  });
  hf.hessians.reserve(slots.size());
  for (auto& s : slots) hf.hessians.push_back(std::move(*s));
  return hf;
}

/// Binary layout: int32 n, int32 dims[n], f64 dt, f64 t0, then every frame
/// row-major as f64. Native byte order.
inline void write_solution(const std::string& path, const SolutionField& sol) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("write_solution: cannot open " + path);
  const std::int32_t n = sol.grid.n;
  out.write(reinterpret_cast<const char*>(&n), sizeof n);
  for (int p : sol.grid.points) {
    const std::int32_t d = p;
    out.write(reinterpret_cast<const char*>(&d), sizeof d);
  }
  out.write(reinterpret_cast<const char*>(&sol.grid.dt), sizeof(double));
  out.write(reinterpret_cast<const char*>(&sol.grid.t0), sizeof(double));
  for (const auto& f : sol.frames)
    out.write(reinterpret_cast<const char*>(f.data()), static_cast<std::streamsize>(f.size() * sizeof(double)));
  if (!out) throw ConfigError("write_solution: write failed for " + path);

  std::ofstream meta(path + ".meta");
  meta << std::setprecision(15);
  meta << "n = " << sol.grid.n << "\n";
  for (int a = 0; a < sol.grid.n; ++a)
    meta << "axis" << a << " = " << sol.grid.lo[a] << " " << sol.grid.hi[a] << " " << sol.grid.points[a] << "\n";
  meta << "dt = " << sol.grid.dt << "\nt0 = " << sol.grid.t0 << "\nt1 = " << sol.grid.t1
       << "\nframes = " << sol.frames.size() << "\n";
}

/// Reads a solution written by write_solution and checks it against the
/// expected grid. Shape mismatches and truncation raise ConfigError with the
/// byte offset where reading stopped.
inline SolutionField read_solution(const std::string& path, const GridSpec& grid) {
  grid.validate();
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("read_solution: cannot open " + path);
  std::size_t offset = 0;
  auto read = [&](void* dst, std::size_t bytes, const char* what) {
    in.read(static_cast<char*>(dst), static_cast<std::streamsize>(bytes));
    const auto got = static_cast<std::size_t>(in.gcount());
    if (got != bytes) {
      std::ostringstream msg;
      msg << "read_solution: truncated file " << path << " at offset " << offset + got << " while reading "
          << what << " (needed " << bytes << " bytes at offset " << offset << ")";
      throw ConfigError(msg.str());
    }
    offset += bytes;
  };
  std::int32_t n = 0;
  read(&n, sizeof n, "n");
  if (n != grid.n)
    throw ConfigError("read_solution: file has n = " + std::to_string(n) + ", config has " +
                      std::to_string(grid.n));
  for (int a = 0; a < n; ++a) {
    std::int32_t d = 0;
    read(&d, sizeof d, "dims");
    if (d != grid.points[a])
      throw ConfigError("read_solution: axis " + std::to_string(a) + " has " + std::to_string(d) +
                        " points, config has " + std::to_string(grid.points[a]));
  }
  double dt = 0.0, t0 = 0.0;
  read(&dt, sizeof dt, "dt");
  read(&t0, sizeof t0, "t0");
  if (dt != grid.dt || t0 != grid.t0) throw ConfigError("read_solution: dt or t0 does not match config");

  SolutionField sol{grid, {}};
  const std::size_t frames = grid.frame_count();
  sol.frames.assign(frames, std::vector<double>(grid.point_count()));
  for (std::size_t m = 0; m < frames; ++m)
    read(sol.frames[m].data(), grid.point_count() * sizeof(double), "frame data");
  if (in.peek() != std::char_traits<char>::eof())
    throw ConfigError("read_solution: trailing bytes after offset " + std::to_string(offset));
  return sol;
}

/// CSV of one frame: point_index, x0..x{n-1}, u.
inline void write_frame_csv(const std::string& path, const SolutionField& sol, std::size_t m) {
  if (m >= sol.frame_count()) throw ArgumentError("write_frame_csv: frame out of range");
  std::ofstream out(path);
  if (!out) throw ConfigError("write_frame_csv: cannot open " + path);
  out << std::setprecision(15) << "point_index";
  for (int a = 0; a < sol.grid.n; ++a) out << ",x" << a;
  out << ",u\n";
  for (std::size_t p = 0; p < sol.grid.point_count(); ++p) {
    out << p;
    const auto x = sol.grid.position(p);
    for (int a = 0; a < sol.grid.n; ++a) out << "," << x(a);
    out << "," << sol.frames[m][p] << "\n";
  }
}

/// Max |u - exact| over every point of frame m.
inline double max_error(const SolutionField& sol, std::size_t m,
                        const std::function<double(const Eigen::VectorXd&, double)>& exact) {
  double e = 0.0;
  for (std::size_t p = 0; p < sol.grid.point_count(); ++p)
    e = std::max(e, std::abs(sol.frames[m][p] - exact(sol.grid.position(p), sol.time(m))));
  return e;
}

}  // namespace ranklab
