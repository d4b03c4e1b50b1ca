#include <gtest/gtest.h>

#include "oracles.hpp"
#include "ranklab/verify.hpp"

using namespace ranklab;

namespace {

ExpWave wave(std::initializer_list<double> a) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  Eigen::Index i = 0;
  for (double x : a) v(i++) = x;
  return {v};
}

QuadraticDrift drift(std::initializer_list<double> q_diag) {
  const auto n = static_cast<Eigen::Index>(q_diag.size());
  Eigen::VectorXd d(n);
  Eigen::Index i = 0;
  for (double x : q_diag) d(i++) = x;
  return {Eigen::MatrixXd(d.asDiagonal()), Eigen::VectorXd::Zero(n), 0.0};
}

// Closed-form field on the unit cube with dt = h.
SolutionField closed(const ExactSolution& u, int n, int points, double t1 = 0.5) {
  const double h = 1.0 / (points - 1);
  return exact_solution(u, GridSpec::cube(n, 0, 1, points, h, 0, t1));
}

// Samples an arbitrary u(x, t) on every frame.
SolutionField sampled(const std::function<double(const Eigen::VectorXd&, double)>& u, int n, int points) {
  const double h = 1.0 / (points - 1);
  SolutionField sol{GridSpec::cube(n, 0, 1, points, h, 0, 0.5), {}};
  for (std::size_t m = 0; m < sol.grid.frame_count(); ++m) sol.frames.push_back(sample_frame(sol.grid, sol.time(m), u));
  return sol;
}

double sup_abs_phi_simple(int points) {
  const auto sol = closed(ExactSolution{{wave({1})}}, 1, points);
  return diff_inequality(sol, make_heat(1), 1, PhiVariant::Simple).sup_abs_phi;
}

}  // namespace

TEST(PhiVariant, Parsing) {
  EXPECT_EQ(parse_phi_variant("simple"), PhiVariant::Simple);
  EXPECT_EQ(parse_phi_variant("bian_guan"), PhiVariant::BianGuan);
  EXPECT_STREQ(to_string(PhiVariant::BianGuan), "bian_guan");
  EXPECT_THROW(parse_phi_variant("other"), ConfigError);
}

TEST(Phi, QuadraticDriftIsExactlyZero) {
  const auto sol = closed(ExactSolution{{drift({1, 0})}}, 2, 17);
  const auto hf = hessian_field(sol, 2, 2);
  for (double v : phi_field(hf, 1, PhiVariant::Simple).values) EXPECT_EQ(v, 0.0);
  for (double v : phi_field(hf, 1, PhiVariant::BianGuan).values) EXPECT_EQ(v, 0.0);
}

TEST(Phi, ExpWaveDeterminantIsSmall) {
  const double h = 1.0 / 32;
  const auto sol = closed(ExactSolution{{wave({1})}}, 1, 33);
  const auto hf = hessian_field(sol, 4, 2);
  for (std::size_t i = 0; i < hf.hessians.size(); ++i) {
    const double phi = phi_value(hf.hessians[i], 1, PhiVariant::Simple);
    EXPECT_NEAR(phi, hf.hessians[i].materialize().matrix().determinant(), 1e-12);
    EXPECT_LE(std::abs(phi), 10 * h * h * std::exp(2.0 + 1.0));
  }
}

TEST(Phi, QZeroBranch) {
  EXPECT_EQ(q_function(SymMatrix::diagonal({1, 0, 0}), 1), 0.0);
  // sigma_3 / sigma_2 of diag(1, 2, 3).
  EXPECT_NEAR(q_function(SymMatrix::diagonal({1, 2, 3}), 1), 6.0 / 11.0, 1e-14);
  EXPECT_EQ(q_zero_threshold(0.0), 1e-10);
  const SpacetimeHessian w(SymMatrix::diagonal({1, 2}), Eigen::Vector2d::Zero(), 0.0);
  EXPECT_NEAR(phi_value(w, 1, PhiVariant::BianGuan), 2.0, 1e-14);
  EXPECT_NEAR(phi_value(w, 0, PhiVariant::BianGuan), 3.0 + 2.0 / 3.0, 1e-14);
}

TEST(Phi, LOutOfRange) {
  const auto sol = closed(ExactSolution{{wave({1})}}, 1, 17);
  const auto hf = hessian_field(sol, 1);
  EXPECT_THROW(phi_field(hf, 2, PhiVariant::Simple), ArgumentError);
  EXPECT_THROW(phi_field(hf, -1, PhiVariant::Simple), ArgumentError);
}

TEST(Phi, NonnegativeOnConvexClosedForms) {
  const auto sol = closed(ExactSolution{{wave({1, 1}), drift({1, 0.5})}}, 2, 17);
  for (std::size_t m = 1; m + 1 < sol.frame_count(); ++m) {
    const auto hf = hessian_field(sol, m, 2);
    for (int l = 0; l <= 2; ++l)
      for (std::size_t i = 0; i < hf.hessians.size(); ++i) {
        const double scale = std::pow(std::max(1.0, hf.hessians[i].materialize().matrix().cwiseAbs().maxCoeff()), l + 1);
        EXPECT_GE(phi_value(hf.hessians[i], l, PhiVariant::Simple), -1e-10 * scale);
      }
  }
}

TEST(RankTimeline, TwoWaveHasRankTwo) {
  const auto tl = rank_timeline(closed(ExactSolution{{wave({1, 0}), wave({0, 1})}}, 2, 33), 1e-6);
  EXPECT_TRUE(tl.all_constant());
  EXPECT_TRUE(tl.monotone);
  for (int l : tl.l_per_frame) EXPECT_EQ(l, 2);
}

TEST(RankTimeline, ExpWaveOneDimensional) {
  const auto tl = rank_timeline(closed(ExactSolution{{wave({1})}}, 1, 33), 1e-6);
  EXPECT_TRUE(tl.all_constant());
  for (int l : tl.l_per_frame) EXPECT_EQ(l, 1);
}

TEST(RankTimeline, QuadraticDriftFollowsRankQ) {
  const auto tl = rank_timeline(closed(ExactSolution{{drift({1, 0})}}, 2, 17), 1e-6);
  EXPECT_TRUE(tl.all_constant());
  EXPECT_TRUE(tl.monotone);
  for (int l : tl.l_per_frame) EXPECT_EQ(l, 1);
}

TEST(RankTimeline, WavePlusQuadraticIsFull) {
  const auto sol = closed(ExactSolution{{wave({1}), drift({1})}}, 1, 33);
  const auto tl = rank_timeline(sol, 1e-6);
  EXPECT_TRUE(tl.all_constant());
  for (int l : tl.l_per_frame) EXPECT_EQ(l, 2);
  // Brute-force determinant at the sample points.
  const auto hf = hessian_field(sol, 3, 2);
  for (const auto& w : hf.hessians) EXPECT_GT(oracle::principal_minor_sum(w.materialize().matrix(), 2), 0.1);
}

TEST(RankTimeline, TighterToleranceNeverLowersRank) {
  const auto sol = closed(ExactSolution{{wave({1, 0.3})}}, 2, 17);
  const auto loose = rank_timeline(sol, 1e-3);
  const auto tight = rank_timeline(sol, 1e-12);
  ASSERT_EQ(loose.ranks.size(), tight.ranks.size());
  for (std::size_t f = 0; f < loose.ranks.size(); ++f)
    for (std::size_t i = 0; i < loose.ranks[f].size(); ++i) EXPECT_GE(tight.ranks[f][i], loose.ranks[f][i]);
}

TEST(RankTimeline, FirstFrameAndErrors) {
  const auto sol = closed(ExactSolution{{wave({1})}}, 1, 17);
  const auto tl = rank_timeline(sol, 1e-6, 2, 5);
  EXPECT_EQ(tl.frames.front(), 5u);
  EXPECT_EQ(tl.frames.back(), sol.frame_count() - 2);
  EXPECT_THROW(rank_timeline(sol, 1e-6, 2, sol.frame_count()), ArgumentError);
  SolutionField tiny{sol.grid, {sol.frames[0], sol.frames[1]}};
  EXPECT_THROW(rank_timeline(tiny), ArgumentError);
}

TEST(CaseResiduals, ExpWaveIsCase2AtSecondOrder) {
  std::vector<double> residual;
  for (int points : {33, 65}) {
    const auto sol = closed(ExactSolution{{wave({1})}}, 1, points);
    const auto hf = hessian_field(sol, 4, 2);
    const auto s = case_residuals(hf, sol.grid, 1e-2);
    EXPECT_EQ(s.case1, 0u);
    EXPECT_EQ(s.case2, hf.hessians.size());
    residual.push_back(s.max_case2_residual);
  }
  EXPECT_GT(residual[0] / residual[1], 3.0);
}

TEST(CaseResiduals, QuadraticDriftIsCase2) {
  const auto sol = closed(ExactSolution{{drift({1, 0})}}, 2, 17);
  const auto hf = hessian_field(sol, 2, 2);
  const auto s = case_residuals(hf, sol.grid, 1e-6);
  EXPECT_EQ(s.case2, hf.hessians.size());
  for (const auto& r : s.reports) {
    EXPECT_EQ(r.total_rank, 1);
    EXPECT_EQ(r.spatial_rank, 1);
  }
  EXPECT_LE(s.max_case2_residual, 1e-10);
}

TEST(CaseResiduals, SyntheticCase1Field) {
  const auto sol = sampled([](const Eigen::VectorXd& x, double t) { return 0.5 * x(0) * x(0) + 0.5 * t * t; }, 2, 17);
  const auto hf = hessian_field(sol, 3, 2);
  const auto s = case_residuals(hf, sol.grid, 1e-6);
  EXPECT_EQ(s.case1, hf.hessians.size());
  EXPECT_NEAR(s.min_case1_gap, 1.0, 1e-8);
}

TEST(CaseResiduals, DefectCarriesCoordinates) {
  const auto sol = sampled([](const Eigen::VectorXd& x, double) { return -0.5 * x(0) * x(0); }, 1, 17);
  const auto hf = hessian_field(sol, 2, 2);
  try {
    case_residuals(hf, sol.grid, 1e-6);
    FAIL() << "expected precondition error";
  } catch (const PreconditionError& e) {
    EXPECT_NE(std::string(e.what()).find("x = "), std::string::npos);
  }
}

TEST(PsdMonitor, Examples) {
  const auto concave = sampled([](const Eigen::VectorXd& x, double) { return -0.5 * x(0) * x(0); }, 1, 17);
  EXPECT_NEAR(psd_monitor(hessian_field(concave, 2)), 1.0, 1e-8);
  const auto quad = closed(ExactSolution{{drift({1, 0})}}, 2, 17);
  EXPECT_LE(psd_monitor(hessian_field(quad, 2)), 1e-12);
  const double h = 1.0 / 32;
  const auto expw = closed(ExactSolution{{wave({1, 1})}}, 2, 33);
  EXPECT_LE(psd_monitor(hessian_field(expw, 2)), 10 * h * h * std::exp(2.5));
}

TEST(BorderedConsistency, ClosedForms) {
  const auto sol = closed(ExactSolution{{wave({1, 1}), wave({1, -1}), drift({0.5, 0})}}, 2, 17);
  for (int l = 0; l <= 2; ++l) EXPECT_LE(bordered_consistency(hessian_field(sol, 2, 2), l), 1e-9);
}

TEST(DiffInequality, QuadraticDriftIsIdenticallyZero) {
  const auto sol = closed(ExactSolution{{drift({1, 0})}}, 2, 17);
  for (auto v : {PhiVariant::Simple, PhiVariant::BianGuan}) {
    const auto r = diff_inequality(sol, make_heat(2), 1, v);
    EXPECT_EQ(r.sup_abs_phi, 0.0);
    EXPECT_EQ(r.sup_abs_lhs, 0.0);
    EXPECT_EQ(r.sup_ratio, 0.0);
    EXPECT_GT(r.evaluated, 0u);
  }
}

TEST(DiffInequality, ExpWavePhiIsSecondOrder) {
  const double coarse = sup_abs_phi_simple(33);
  const double fine = sup_abs_phi_simple(65);
  EXPECT_GT(coarse, 0.0);
  EXPECT_GE(std::log2(coarse / fine), 1.8);
}

TEST(DiffInequality, ExpWaveLhsShrinksUnderRefinement) {
  double prev = std::numeric_limits<double>::infinity();
  double prev_ratio = 0.0;
  for (int points : {17, 33, 65}) {
    const auto sol = closed(ExactSolution{{wave({1})}}, 1, points);
    const auto r = diff_inequality(sol, make_heat(1), 1, PhiVariant::Simple);
    EXPECT_LT(r.sup_abs_lhs, prev);
    if (prev_ratio > 0) EXPECT_LE(std::abs(r.sup_ratio), 10 * std::abs(prev_ratio) + 1.0);
    prev = r.sup_abs_lhs;
    prev_ratio = r.sup_ratio;
  }
}

TEST(DiffInequality, NonlinearOperatorUsesGradient) {
  const auto sol = closed(ExactSolution{{wave({1, 1}), drift({1, 1})}}, 2, 17);
  const auto r = diff_inequality(sol, make_hessian_power(2), 1, PhiVariant::BianGuan);
  EXPECT_GT(r.evaluated, 0u);
  EXPECT_TRUE(std::isfinite(r.sup_ratio));
}

TEST(DiffInequality, NeedsFrames) {
  const auto sol = closed(ExactSolution{{wave({1})}}, 1, 17);
  EXPECT_THROW(diff_inequality(sol, make_heat(1), 1, PhiVariant::Simple, 2, sol.frame_count() - 2), ArgumentError);
}

TEST(Verify, IndependentOfThreadCount) {
  const auto sol = closed(ExactSolution{{wave({1, 0.5})}}, 2, 17);
  parallel::set_max_threads(1);
  const auto a = diff_inequality(sol, make_heat(2), 1, PhiVariant::Simple);
  const auto ta = rank_timeline(sol, 1e-6);
  parallel::set_max_threads(4);
  const auto b = diff_inequality(sol, make_heat(2), 1, PhiVariant::Simple);
  const auto tb = rank_timeline(sol, 1e-6);
  parallel::set_max_threads(1);
  EXPECT_EQ(a.phi, b.phi);
  EXPECT_EQ(a.lhs, b.lhs);
  EXPECT_EQ(ta.ranks, tb.ranks);
}
