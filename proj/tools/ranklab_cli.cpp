// ranklab: command-line front end.
//
// Exit codes: 0 success or pass, 1 verification failure or divergence,
// 2 usage or configuration error.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ranklab.hpp"

namespace {

using namespace ranklab;
using json = nlohmann::json;

constexpr int kOk = 0;
constexpr int kFail = 1;
constexpr int kUsage = 2;

std::string output_dir(const ExperimentConfig& cfg) {
  if (const char* env = std::getenv("RANKLAB_OUT"); env && *env) return env;
  return cfg.output_dir;
}

int cmd_sigma(const std::string& lambda, const std::string& matrix, int k, const std::string& drop) {
  if (lambda.empty() == matrix.empty()) throw ConfigError("sigma: give exactly one of --lambda or --matrix");
  double value = 0.0;
  if (!lambda.empty()) {
    if (!drop.empty()) throw ConfigError("sigma: --drop needs --matrix");
    const Eigen::VectorXd v = config::parse_vector(lambda, "--lambda");
    value = sigma(std::span<const double>(v.data(), static_cast<std::size_t>(v.size())), k);
  } else {
    const SymMatrix w(config::parse_matrix(matrix, "--matrix"));
    if (drop.empty()) {
      value = sigma_matrix(w, k);
    } else {
      const Eigen::VectorXd d = config::parse_vector(drop, "--drop");
      std::vector<Eigen::Index> idx;
      for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (d(i) != std::floor(d(i))) throw ConfigError("--drop: indices must be integers");
        idx.push_back(static_cast<Eigen::Index>(d(i)));
      }
      value = sigma_minor(w, k, idx);
    }
  }
  std::cout << format15(value) << "\n";
  return kOk;
}

int cmd_classify(const std::string& spatial, const std::string& mixed, double temporal, double tol) {
  const SymMatrix s(config::parse_matrix(spatial, "--spatial"));
  const Eigen::VectorXd m = config::parse_vector(mixed, "--mixed");
  const SpacetimeHessian w(s, m, temporal);
  try {
    const CaseReport r = classify_case(w, tol);
    std::cout << "l = " << r.total_rank << "\n"
              << "k = " << r.spatial_rank << "\n"
              << "case = " << to_string(r.tag) << "\n"
              << "gap = " << format15(r.gap) << "\n"
              << "residual = " << format15(r.residual) << "\n";
  } catch (const InconsistencyError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFail;
  }
  return kOk;
}

json witness_json(const std::optional<Witness>& w) {
  if (!w) return nullptr;
  json j;
  j["test"] = w->test;
  j["direction"] = w->direction;
  j["value"] = round15(w->value);
  j["sample"] = w->sample;
  j["u"] = round15(w->base.u);
  j["t"] = round15(w->base.t);
  std::vector<std::vector<double>> a;
  for (Eigen::Index i = 0; i < w->base.A.dim(); ++i) {
    a.emplace_back();
    for (Eigen::Index k = 0; k < w->base.A.dim(); ++k) a.back().push_back(round15(w->base.A(i, k)));
  }
  j["A"] = a;
  return j;
}

int cmd_check_operator(const std::string& path, std::optional<std::uint64_t> seed) {
  ExperimentConfig cfg = config::load(path);
  if (seed) cfg.check.seed = *seed;
  const OperatorSpec spec = cfg.build_operator();
  const EllipticityReport ell = check_ellipticity_sampled(spec, cfg.check, cfg.ellipticity_tol);
  const Verdict v = check_structure_condition(spec, cfg.check);

  std::cout << "operator: " << spec.label() << "\n";
  std::cout << "ellipticity: " << (ell.pass ? "pass" : "fail") << " (min eigenvalue of F_A "
            << format15(ell.min_eigenvalue) << " over " << ell.samples << " samples)\n";
  std::cout << "structure condition: " << (v.pass ? "pass" : "fail") << "\n";
  std::cout << "  test 1 (Q* sampling): " << (v.qstar_pass ? "pass" : "fail") << ", min Q* "
            << format15(v.min_qstar) << " over " << v.qstar_samples << " directions\n";
  std::cout << "  test 2 (chord convexity): " << (v.chord_pass ? "pass" : "fail") << ", min second difference "
            << format15(v.min_chord_second_difference) << " over " << v.chord_samples << " chords\n";
  if (v.qstar_witness) std::cout << "  " << v.qstar_witness->describe() << "\n";
  if (v.chord_witness) std::cout << "  " << v.chord_witness->describe() << "\n";
  if (!v.tests_agree()) std::cout << "  warning: tests 1 and 2 disagree\n";
  std::cout << "  " << v.sampling_note << "\n";

  json j;
  j["operator"] = spec.label();
  j["ellipticity"] = {{"pass", ell.pass},
                      {"min_eigenvalue", round15(ell.min_eigenvalue)},
                      {"samples", ell.samples}};
  j["structure"] = {{"pass", v.pass},
                    {"qstar_pass", v.qstar_pass},
                    {"chord_pass", v.chord_pass},
                    {"min_qstar", round15(v.min_qstar)},
                    {"min_chord_second_difference", round15(v.min_chord_second_difference)},
                    {"qstar_samples", v.qstar_samples},
                    {"chord_samples", v.chord_samples},
                    {"qstar_witness", witness_json(v.qstar_witness)},
                    {"chord_witness", witness_json(v.chord_witness)},
                    {"tests_agree", v.tests_agree()}};
  j["seed"] = v.seed;
  j["sampling"] = v.sampling_note;
  if (cfg.formats.count("json")) {
    const std::string dir = output_dir(cfg);
    std::filesystem::create_directories(dir);
    std::ofstream out(std::filesystem::path(dir) / "check.json");
    out << j.dump(2) << "\n";
  }
  return ell.pass && v.pass ? kOk : kFail;
}

void print_summary(const VerificationResult& v, const SolutionField& sol) {
  for (std::size_t f = 0; f < v.timeline.frames.size(); ++f)
    std::cout << "frame " << v.timeline.frames[f] << " t = " << format15(sol.time(v.timeline.frames[f]))
              << " l = " << v.timeline.l_per_frame[f]
              << (v.timeline.constancy[f] ? " constant" : " NOT constant") << "\n";
  std::cout << "constancy = " << (v.timeline.all_constant() ? "true" : "false") << "\n"
            << "monotone = " << (v.timeline.monotone ? "true" : "false") << "\n"
            << "l used = " << v.l_used << " (" << to_string(v.inequality_variant) << ")\n"
            << "sup_ratio = " << format15(v.residual.sup_ratio) << "\n"
            << "sup |phi| = " << format15(v.residual.sup_abs_phi) << "\n"
            << "max_case2_residual = " << format15(v.max_case2_residual) << "\n"
            << "max psd defect = " << format15(v.max_psd_defect) << "\n";
}

int finish_verification(const SolutionField& sol, const ExperimentConfig& cfg, bool include_solution) {
  const OperatorSpec spec = cfg.build_operator();
  const VerificationResult v = run_verification(sol, spec, cfg);
  print_summary(v, sol);
  for (const auto& p : write_artifacts(output_dir(cfg), sol, v, cfg, include_solution))
    std::cout << "wrote " << p << "\n";
  return v.timeline.all_constant() && v.timeline.monotone ? kOk : kFail;
}

int cmd_run(const std::string& path) {
  const ExperimentConfig cfg = config::load(path);
  SolutionField sol = [&] {
    try {
      return produce_solution(cfg);
    } catch (const DivergenceError& e) {
      std::cerr << "divergence at frame " << e.frame_index << ": " << e.what() << "\n";
      throw;
    }
  }();
  return finish_verification(sol, cfg, true);
}

int cmd_verify(const std::string& solution, const std::string& path, std::optional<double> rank_tol) {
  ExperimentConfig cfg = config::load(path);
  if (rank_tol) {
    if (!(*rank_tol > 0)) throw ConfigError("--rank-tol must be > 0");
    cfg.rank_tol = *rank_tol;
  }
  const SolutionField sol = read_solution(solution, cfg.require_grid());
  return finish_verification(sol, cfg, false);
}

int cmd_report(const std::string& target) {
  std::filesystem::path p(target);
  if (std::filesystem::is_directory(p)) p /= "summary.json";
  std::ifstream in(p);
  if (!in) throw ConfigError("report: cannot open " + p.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("report: malformed JSON: ") + e.what());
  }
  for (const char* key : {"l_per_frame", "constancy", "monotone", "sup_ratio", "max_case2_residual"})
    if (!j.contains(key)) throw ConfigError(std::string("report: summary lacks '") + key + "'");
  const auto& l = j["l_per_frame"];
  int lo = l.empty() ? 0 : l.front().get<int>();
  int hi = lo;
  for (const auto& v : l) {
    lo = std::min(lo, v.get<int>());
    hi = std::max(hi, v.get<int>());
  }
  std::cout << "frames covered: " << l.size() << "\n"
            << "l(t) range: [" << lo << ", " << hi << "]\n"
            << "constancy: " << j["constancy"].dump() << "\n"
            << "monotone: " << j["monotone"].dump() << "\n"
            << "sup_ratio: " << j["sup_ratio"].dump() << "\n"
            << "max_case2_residual: " << j["max_case2_residual"].dump() << "\n";
  return j["constancy"].get<bool>() && j["monotone"].get<bool>() ? kOk : kFail;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ranklab: rank and convexity checks for fully nonlinear parabolic flows"};
  app.require_subcommand(1);
  unsigned threads = 1;
  app.add_option("--threads", threads, "Worker threads (0 = hardware concurrency)");

  std::string lambda, matrix, drop;
  int k = 0;
  auto* sigma_cmd = app.add_subcommand("sigma", "Elementary symmetric function of a vector or matrix");
  sigma_cmd->add_option("--lambda", lambda, "Comma-separated values");
  sigma_cmd->add_option("--matrix", matrix, "Symmetric matrix, rows separated by ';'");
  sigma_cmd->add_option("--k", k, "Order k >= 0")->required();
  sigma_cmd->add_option("--drop", drop, "Zero-based indices to delete (needs --matrix)");

  std::string spatial, mixed;
  double temporal = 0.0;
  double tol = kDefaultRankTol;
  auto* classify_cmd = app.add_subcommand("classify", "Rank dichotomy of a spacetime Hessian");
  classify_cmd->add_option("--spatial", spatial, "D^2u, rows separated by ';'")->required();
  classify_cmd->add_option("--mixed", mixed, "Du_t")->required();
  classify_cmd->add_option("--temporal", temporal, "u_tt")->required();
  classify_cmd->add_option("--tol", tol, "Rank tolerance");

  std::string config_path, solution_path, report_target;
  std::optional<std::uint64_t> seed;
  std::optional<double> rank_tol;
  auto* check_cmd = app.add_subcommand("check-operator", "Sample ellipticity and the structure condition");
  check_cmd->add_option("config", config_path)->required();
  check_cmd->add_option("--seed", seed, "Overrides check.seed");

  auto* run_cmd = app.add_subcommand("run", "Solve and verify an experiment");
  run_cmd->add_option("config", config_path)->required();
  run_cmd->add_option("--seed", seed, "Accepted for uniformity; runs are deterministic");

  auto* verify_cmd = app.add_subcommand("verify", "Verify a stored solution");
  verify_cmd->add_option("solution", solution_path)->required();
  verify_cmd->add_option("config", config_path)->required();
  verify_cmd->add_option("--rank-tol", rank_tol, "Overrides verify.rank_tol");
  verify_cmd->add_option("--seed", seed, "Accepted for uniformity; verification is deterministic");

  auto* report_cmd = app.add_subcommand("report", "Summarize a summary.json");
  report_cmd->add_option("summary", report_target, "summary.json or its directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    parallel::set_max_threads(threads);
    if (*sigma_cmd) return cmd_sigma(lambda, matrix, k, drop);
    if (*classify_cmd) return cmd_classify(spatial, mixed, temporal, tol);
    if (*check_cmd) return cmd_check_operator(config_path, seed);
    if (*run_cmd) return cmd_run(config_path);
    if (*verify_cmd) return cmd_verify(solution_path, config_path, rank_tol);
    if (*report_cmd) return cmd_report(report_target);
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFail;
  } catch (const InconsistencyError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFail;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFail;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
