#include <gtest/gtest.h>

#include "ranklab/experiment.hpp"

using namespace ranklab;

namespace {

const char* kClosed = R"(
grid.n = 1
grid.points = 33
grid.dt = 0.03125
grid.t1 = 0.5
operator.kind = heat
initial.kind = exp_wave
initial.a = 1
solver.method = exact
verify.rank_tol = 1e-6
verify.case_tol = 1e-3
)";

ExperimentConfig with(const std::string& extra) { return config::from_text(std::string(kClosed) + extra); }

}  // namespace

TEST(Format15, Examples) {
  EXPECT_EQ(format15(0.0), "0");
  EXPECT_EQ(format15(-0.0), "0");
  EXPECT_EQ(format15(0.1), "0.1");
  EXPECT_EQ(format15(1.0 / 3.0), "0.333333333333333");
  EXPECT_EQ(format15(1e-20), "1e-20");
  EXPECT_EQ(round15(1.0 / 3.0), 0.333333333333333);
  EXPECT_EQ(std::signbit(round15(-0.0)), false);
}

TEST(ConfigParse, ScalarsVectorsMatrices) {
  EXPECT_EQ(config::parse_double(" 2.5 ", "k"), 2.5);
  EXPECT_THROW(config::parse_double("2.5x", "k"), ConfigError);
  EXPECT_THROW(config::parse_double("", "k"), ConfigError);
  EXPECT_EQ(config::parse_int("7", "k"), 7);
  EXPECT_THROW(config::parse_int("7.5", "k"), ConfigError);
  EXPECT_EQ(config::parse_vector("1, 2,3", "k"), Eigen::Vector3d(1, 2, 3));
  const Eigen::MatrixXd m = config::parse_matrix("1, 0; 0, 2", "k");
  EXPECT_EQ(m, Eigen::Matrix2d(Eigen::Vector2d(1, 2).asDiagonal()));
  EXPECT_THROW(config::parse_matrix("1, 0; 2", "k"), ConfigError);
}

TEST(ConfigParse, FlatFormatErrors) {
  EXPECT_THROW(config::parse_flat("grid.n 3"), ConfigError);
  EXPECT_THROW(config::parse_flat("grid.bogus = 3"), ConfigError);
  EXPECT_THROW(config::parse_flat("grid.n = 1\ngrid.n = 2"), ConfigError);
  EXPECT_THROW(config::parse_flat("grid.n ="), ConfigError);
  const auto kv = config::parse_flat("# comment\n\n grid.n = 2   # trailing\n");
  EXPECT_EQ(kv.at("grid.n"), "2");
}

TEST(ConfigParse, SemanticErrors) {
  EXPECT_THROW(with("verify.rank_tol = 0\n"), ConfigError);  // duplicate key
  EXPECT_THROW(config::from_text("verify.rank_tol = -1"), ConfigError);
  EXPECT_THROW(config::from_text("verify.case_tol = 0"), ConfigError);
  EXPECT_THROW(config::from_text("grid.n = 4\ngrid.points = 9\ngrid.dt = 0.1\ngrid.t1 = 1"), ConfigError);
  EXPECT_THROW(config::from_text("grid.n = 1\ngrid.points = 9\ngrid.dt = 0.1"), ConfigError);
  EXPECT_THROW(config::from_text("boundary.kind = periodic"), ConfigError);
  EXPECT_THROW(config::from_text("solver.method = implicit"), ConfigError);
  EXPECT_THROW(config::from_text("operator.kind = magic"), ConfigError);
  EXPECT_THROW(config::from_text("operator.kind = hessian_quotient:1:1"), ConfigError);
  EXPECT_THROW(config::from_text("verify.variants = simple, fancy"), ConfigError);
  EXPECT_THROW(config::from_text("output.formats = xml"), ConfigError);
  EXPECT_THROW(config::from_text("grid.n = 2\ngrid.points = 9\ngrid.dt = 0.1\ngrid.t1 = 1\ncheck.n = 3"), ConfigError);
  EXPECT_THROW(config::load("/nonexistent/ranklab.cfg"), ConfigError);
}

TEST(ConfigParse, InitialData) {
  EXPECT_THROW(config::from_text("grid.n = 2\ngrid.points = 9\ngrid.dt = 0.1\ngrid.t1 = 1\n"
                                 "initial.kind = quadratic_drift\ninitial.Q = 1, 0; 0, -1"),
               ConfigError);
  EXPECT_THROW(config::from_text("grid.n = 2\ngrid.points = 9\ngrid.dt = 0.1\ngrid.t1 = 1\n"
                                 "initial.kind = exp_wave\ninitial.a = 1, 2, 3"),
               ConfigError);
  const auto c = config::from_text("grid.n = 2\ngrid.points = 9\ngrid.dt = 0.1\ngrid.t1 = 1\n"
                                   "initial.kind = exp_wave+quadratic_drift\ninitial.a = 1, 0; 0, 1\n"
                                   "initial.Q = 1, 0; 0, 0");
  EXPECT_EQ(c.build_initial().terms.size(), 3u);
}

TEST(ConfigParse, OperatorKinds) {
  EXPECT_EQ(config::from_text("check.n = 3").build_operator().label(), "heat");
  EXPECT_EQ(config::from_text("operator.kind = hessian_power\noperator.k = 2").build_operator().label(), "hessian_power");
  EXPECT_EQ(config::from_text("operator.kind = hessian_quotient:3:1").build_operator().label(), "hessian_quotient");
  EXPECT_EQ(config::from_text("operator.kind = linear\noperator.coeff = 1, 0; 0, 0").build_operator().label(), "linear");
  EXPECT_THROW(config::from_text("operator.kind = linear\noperator.coeff = 1, 0, 0"), ConfigError);
  const auto comp = config::from_text(
      "operator.kind = composition\noperator.g = power\noperator.alpha = 2\noperator.children = hessian_power:1");
  EXPECT_EQ(comp.build_operator().label(), "composition(power)");
  EXPECT_THROW(config::from_text("operator.kind = composition\noperator.g = power\noperator.children = heat, heat"),
               ConfigError);
}

TEST(ConfigParse, Defaults) {
  const auto c = with("");
  EXPECT_EQ(c.margin, 2);
  EXPECT_EQ(c.first_frame, 1u);
  EXPECT_EQ(c.variants.size(), 2u);
  EXPECT_EQ(c.boundary, "exact");
  EXPECT_EQ(c.output_dir, "out");
  EXPECT_EQ(c.formats.size(), 3u);
}

TEST(Pipeline, ClosedFormRun) {
  const auto cfg = with("");
  const auto sol = produce_solution(cfg);
  const auto v = run_verification(sol, cfg.build_operator(), cfg);
  EXPECT_TRUE(v.timeline.all_constant());
  EXPECT_TRUE(v.timeline.monotone);
  EXPECT_EQ(v.l_used, 1);
  EXPECT_EQ(v.case1, 0u);
  EXPECT_GT(v.case2, 0u);
  const auto j = verification_json(sol, v, cfg);
  for (const char* key : {"l_per_frame", "constancy", "monotone", "sup_ratio", "max_case2_residual"})
    EXPECT_TRUE(j.contains(key)) << key;
  const auto csv = verification_csv(sol, v);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "frame,t,point_index,rank,case,gap,phi_simple,phi_bg,psd_defect,lhs,ratio");
}

TEST(Pipeline, ExactMethodRequiresHeat) {
  const auto cfg = config::from_text(
      "grid.n = 1\ngrid.points = 17\ngrid.dt = 0.0625\ngrid.t1 = 0.5\noperator.kind = hessian_power:1\n"
      "initial.kind = exp_wave\ninitial.a = 1\nsolver.method = exact");
  EXPECT_THROW(produce_solution(cfg), ConfigError);
}

TEST(Pipeline, VerifyLBeyondDimension) {
  const auto cfg = with("verify.l = 2\n");
  EXPECT_THROW(run_verification(produce_solution(cfg), cfg.build_operator(), cfg), ConfigError);
}

TEST(Pipeline, JsonIndependentOfThreadCount) {
  const auto cfg = config::from_text(
      "grid.n = 2\ngrid.points = 17\ngrid.dt = 0.0625\ngrid.t1 = 0.5\noperator.kind = heat\n"
      "initial.kind = exp_wave\ninitial.a = 1, 0.5\nsolver.method = exact\nverify.rank_tol = 1e-6\n"
      "verify.case_tol = 1e-3");
  parallel::set_max_threads(1);
  const auto sol1 = produce_solution(cfg);
  const auto a = verification_json(sol1, run_verification(sol1, cfg.build_operator(), cfg), cfg).dump(2);
  parallel::set_max_threads(4);
  const auto sol4 = produce_solution(cfg);
  const auto b = verification_json(sol4, run_verification(sol4, cfg.build_operator(), cfg), cfg).dump(2);
  parallel::set_max_threads(1);
  EXPECT_EQ(a, b);
}
