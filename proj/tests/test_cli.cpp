#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code = -1;
  std::string out;
};

// Runs the CLI through the shell with stderr merged into stdout.
Result cli(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + " " + RANKLAB_CLI_PATH + " " + args + " 2>&1";
  Result r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t got;
  while ((got = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, got);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string cfg(const std::string& name) { return std::string(RANKLAB_CONFIG_DIR) + "/" + name; }

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("ranklab_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string out_env(const fs::path& dir) { return "RANKLAB_OUT='" + dir.string() + "'"; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string write_config(const fs::path& dir, const std::string& text) {
  const fs::path p = dir / "exp.cfg";
  std::ofstream(p) << text;
  return p.string();
}

// Rank column of verify.csv, one entry per row.
std::vector<int> ranks(const fs::path& csv) {
  std::ifstream in(csv);
  std::string line;
  std::getline(in, line);
  std::vector<int> out;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    for (int c = 0; c < 4; ++c) std::getline(ss, cell, ',');
    out.push_back(std::stoi(cell));
  }
  return out;
}

const char* kTwoWave =
    "grid.n = 2\ngrid.points = 17\ngrid.dt = 0.0625\ngrid.t1 = 0.5\noperator.kind = heat\n"
    "initial.kind = exp_wave\ninitial.a = 1, 0; 0.5, 1\nsolver.method = exact\n"
    "verify.rank_tol = 1e-6\nverify.case_tol = 1e-3\n";

}  // namespace

TEST(Cli, SigmaExamples) {
  auto r = cli("sigma --lambda 1,2,3 --k 2");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "11\n");
  EXPECT_EQ(cli("sigma --lambda 1,2,3 --k 0").out, "1\n");
  EXPECT_EQ(cli("sigma --lambda 1,2,3 --k 4").out, "0\n");
  r = cli("sigma --matrix '1,0,0;0,2,0;0,0,3' --k 1 --drop 0");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "5\n");
}

TEST(Cli, SigmaUsageErrors) {
  EXPECT_EQ(cli("sigma --lambda 1,x --k 2").code, 2);
  EXPECT_EQ(cli("sigma --k 2").code, 2);
  EXPECT_EQ(cli("sigma --lambda 1,2 --k -1").code, 2);
  EXPECT_EQ(cli("sigma --lambda 1,2").code, 2);
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("bogus").code, 2);
}

TEST(Cli, Classify) {
  auto r = cli("classify --spatial '1,0;0,0' --mixed 1,0 --temporal 1");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("CASE2"), std::string::npos);
  r = cli("classify --spatial '1,0;0,0' --mixed 0,0 --temporal 1");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("CASE1"), std::string::npos);
  EXPECT_EQ(cli("classify --spatial '1,0;0,0' --mixed 0,0 --temporal -1").code, 2);
}

TEST(Cli, CheckOperatorPassAndFail) {
  const auto dir = scratch("check");
  auto r = cli("check-operator " + cfg("check_sigma2.cfg"), out_env(dir));
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_TRUE(fs::exists(dir / "check.json"));
  r = cli("check-operator " + cfg("check_trace_minus_u2.cfg"), out_env(dir));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("direction Y"), std::string::npos) << r.out;
  const auto j = nlohmann::json::parse(slurp(dir / "check.json"));
  EXPECT_FALSE(j["structure"]["pass"].get<bool>());
  EXPECT_LE(j["structure"]["min_qstar"].get<double>(), -1.99);
}

TEST(Cli, CheckOperatorSeedIsReproducible) {
  const auto a = scratch("seed_a"), b = scratch("seed_b");
  EXPECT_EQ(cli("check-operator " + cfg("check_composition.cfg") + " --seed 42", out_env(a)).code, 0);
  EXPECT_EQ(cli("--threads 4 check-operator " + cfg("check_composition.cfg") + " --seed 42", out_env(b)).code, 0);
  EXPECT_EQ(slurp(a / "check.json"), slurp(b / "check.json"));
}

TEST(Cli, MalformedConfigExitsTwo) {
  const auto dir = scratch("malformed");
  EXPECT_EQ(cli("run " + write_config(dir, "grid.n = 2\ngrid.bogus = 1\n")).code, 2);
  EXPECT_EQ(cli("run " + write_config(dir, "grid.n 2\n")).code, 2);
  EXPECT_EQ(cli("run " + write_config(dir, std::string(kTwoWave) + "verify.rank_tol = 0\n")).code, 2);
  EXPECT_EQ(cli("run /nonexistent.cfg").code, 2);
}

TEST(Cli, StabilityViolationExitsTwo) {
  const auto dir = scratch("cfl");
  const auto path = write_config(dir,
                                 "grid.n = 1\ngrid.points = 33\ngrid.dt = 0.01\ngrid.t1 = 0.1\noperator.kind = heat\n"
                                 "initial.kind = exp_wave\ninitial.a = 1\n");
  const auto r = cli("run " + path, out_env(dir));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("stability"), std::string::npos);
}

TEST(Cli, RunClosedFormTwoWave) {
  const auto dir = scratch("two_wave");
  const auto r = cli("run " + cfg("exp_wave_2d_closed.cfg"), out_env(dir));
  EXPECT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(slurp(dir / "summary.json"));
  EXPECT_TRUE(j["constancy"].get<bool>());
  EXPECT_TRUE(j["monotone"].get<bool>());
  for (int l : j["l_per_frame"].get<std::vector<int>>()) EXPECT_EQ(l, 2);
  EXPECT_TRUE(fs::exists(dir / "solution.bin"));
  EXPECT_TRUE(fs::exists(dir / "verify.csv"));
}

TEST(Cli, RunQuadraticDriftIsExact) {
  const auto dir = scratch("quadratic");
  const auto r = cli("run " + cfg("quadratic_drift_2d.cfg"), out_env(dir));
  EXPECT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(slurp(dir / "summary.json"));
  EXPECT_EQ(j["sup_ratio"].get<double>(), 0.0);
  EXPECT_EQ(j["sup_abs_phi"].get<double>(), 0.0);
  EXPECT_EQ(j["sup_abs_lhs"].get<double>(), 0.0);
  for (int l : j["l_per_frame"].get<std::vector<int>>()) EXPECT_EQ(l, 1);
}

TEST(Cli, RunExplicitSolver) {
  const auto dir = scratch("explicit");
  const auto r = cli("run " + cfg("heat_exp_wave_1d.cfg"), out_env(dir));
  EXPECT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(slurp(dir / "summary.json"));
  EXPECT_TRUE(j["constancy"].get<bool>());
}

TEST(Cli, RunIsByteIdenticalAcrossRunsAndThreads) {
  const auto base = scratch("det");
  const auto path = write_config(base, kTwoWave);
  std::vector<std::string> outputs;
  for (const std::string& threads : {"1", "1", "4", "0"}) {
    const auto dir = scratch("det_" + std::to_string(outputs.size()));
    ASSERT_EQ(cli("--threads " + threads + " run " + path + " --seed 3", out_env(dir)).code, 0);
    outputs.push_back(slurp(dir / "summary.json") + slurp(dir / "verify.csv"));
  }
  for (const auto& o : outputs) EXPECT_EQ(o, outputs.front());
}

TEST(Cli, VerifyStoredSolutionMatchesRun) {
  const auto run_dir = scratch("stored_run"), verify_dir = scratch("stored_verify");
  const auto path = write_config(run_dir, kTwoWave);
  ASSERT_EQ(cli("run " + path, out_env(run_dir)).code, 0);
  const auto r = cli("verify " + (run_dir / "solution.bin").string() + " " + path, out_env(verify_dir));
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(slurp(run_dir / "verify.csv"), slurp(verify_dir / "verify.csv"));
  EXPECT_EQ(slurp(run_dir / "summary.json"), slurp(verify_dir / "summary.json"));
  EXPECT_FALSE(fs::exists(verify_dir / "solution.bin"));
}

TEST(Cli, VerifyTruncatedSolutionExitsTwo) {
  const auto dir = scratch("truncated");
  const auto path = write_config(dir, kTwoWave);
  ASSERT_EQ(cli("run " + path, out_env(dir)).code, 0);
  const auto bin = dir / "solution.bin";
  fs::resize_file(bin, fs::file_size(bin) - 100);
  const auto r = cli("verify " + bin.string() + " " + path, out_env(scratch("truncated_out")));
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.out.find("offset"), std::string::npos) << r.out;
}

TEST(Cli, TighterRankToleranceNeverLowersRanks) {
  const auto run_dir = scratch("tol_run"), tight_dir = scratch("tol_tight");
  const auto path = write_config(run_dir, kTwoWave);
  ASSERT_EQ(cli("run " + path, out_env(run_dir)).code, 0);
  cli("verify " + (run_dir / "solution.bin").string() + " " + path + " --rank-tol 1e-12", out_env(tight_dir));
  const auto loose = ranks(run_dir / "verify.csv");
  const auto tight = ranks(tight_dir / "verify.csv");
  ASSERT_EQ(loose.size(), tight.size());
  ASSERT_FALSE(loose.empty());
  for (std::size_t i = 0; i < loose.size(); ++i) EXPECT_GE(tight[i], loose[i]);
  EXPECT_EQ(cli("verify " + (run_dir / "solution.bin").string() + " " + path + " --rank-tol 0").code, 2);
}

TEST(Cli, Report) {
  const auto dir = scratch("report");
  ASSERT_EQ(cli("run " + write_config(dir, kTwoWave), out_env(dir)).code, 0);
  auto r = cli("report " + dir.string());
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("constancy: true"), std::string::npos);
  EXPECT_EQ(cli("report " + (dir / "summary.json").string()).code, 0);
  EXPECT_EQ(cli("report " + scratch("empty").string()).code, 2);

  auto j = nlohmann::json::parse(slurp(dir / "summary.json"));
  j["constancy"] = false;
  std::ofstream(dir / "summary.json") << j.dump(2);
  EXPECT_EQ(cli("report " + dir.string()).code, 1);
}
