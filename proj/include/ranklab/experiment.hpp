#pragma once

// Experiment configs (flat "section.key = value" text), the verification
// pipeline shared by the run and verify commands, and CSV/JSON writers.

#include <Eigen/Dense>
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "ranklab/errors.hpp"
#include "ranklab/matrixkit.hpp"
#include "ranklab/operators.hpp"
#include "ranklab/pde.hpp"
#include "ranklab/verify.hpp"

namespace ranklab {

/// Shortest text that round-trips the value rounded to 15 significant digits.
inline std::string format15(double v) {
  if (v == 0.0) return "0";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return buf;
}

inline double round15(double v) {
  if (!std::isfinite(v) || v == 0.0) return v + 0.0;
  return std::strtod(format15(v).c_str(), nullptr);
}

namespace config {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline double parse_double(const std::string& s, const std::string& what) {
  try {
    const std::string t = trim(s);
    std::size_t used = 0;
    const double v = std::stod(t, &used);
    if (used != t.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(what + ": cannot parse number '" + s + "'");
  }
}

inline long parse_int(const std::string& s, const std::string& what) {
  try {
    const std::string t = trim(s);
    std::size_t used = 0;
    const long v = std::stol(t, &used);
    if (used != t.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError(what + ": cannot parse integer '" + s + "'");
  }
}

/// "1,2,3"
inline Eigen::VectorXd parse_vector(const std::string& s, const std::string& what) {
  const auto parts = split(s, ',');
  if (parts.empty() || (parts.size() == 1 && parts[0].empty())) throw ConfigError(what + ": empty vector");
  Eigen::VectorXd v(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) v(static_cast<Eigen::Index>(i)) = parse_double(parts[i], what);
  return v;
}

/// Rows separated by ';', entries by ','.
inline Eigen::MatrixXd parse_matrix(const std::string& s, const std::string& what) {
  const auto rows = split(s, ';');
  std::vector<Eigen::VectorXd> r;
  for (const auto& row : rows) r.push_back(parse_vector(row, what));
  const auto cols = r.front().size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(r.size()), cols);
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r[i].size() != cols) throw ConfigError(what + ": ragged matrix rows");
    m.row(static_cast<Eigen::Index>(i)) = r[i].transpose();
  }
  return m;
}

inline const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "grid.n",          "grid.lo",           "grid.hi",         "grid.points",
      "grid.dt",         "grid.t0",           "grid.t1",         "operator.kind",
      "operator.k",      "operator.l",        "operator.coeff",  "operator.drift",
      "operator.reaction", "operator.source", "operator.g",      "operator.alpha",
      "operator.children", "initial.kind",    "initial.a",       "initial.Q",
      "initial.b",       "initial.c",         "boundary.kind",   "solver.method",
      "verify.l",        "verify.rank_tol",   "verify.case_tol", "verify.variants",
      "verify.margin",   "verify.first_frame", "check.n",           "check.points",    "check.directions",
      "check.seed",      "check.a_min",       "check.a_max",     "check.ellipticity_tol",
      "output.dir",      "output.formats"};
  return keys;
}

/// Parses "section.key = value" lines; '#' starts a comment.
inline std::map<std::string, std::string> parse_flat(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    if (!known_keys().count(key))
      throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (val.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty value for '" + key + "'");
    if (out.count(key)) throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    out[key] = val;
  }
  return out;
}

}  // namespace config

struct ExperimentConfig {
  std::map<std::string, std::string> raw;

  std::optional<GridSpec> grid;

  std::string boundary = "exact";          // exact | frozen
  std::string method = "explicit_euler";   // explicit_euler | exact

  std::optional<int> verify_l;
  double rank_tol = kDefaultRankTol;
  double case_tol = kDefaultRankTol;
  std::vector<PhiVariant> variants{PhiVariant::Simple, PhiVariant::BianGuan};
  int margin = 2;
  std::size_t first_frame = 1;

  StructureSampling check;
  double ellipticity_tol = 0.0;

  std::string output_dir = "out";
  std::set<std::string> formats{"bin", "csv", "json"};

  bool has(const std::string& key) const { return raw.count(key) > 0; }
  const std::string& get(const std::string& key) const {
    auto it = raw.find(key);
    if (it == raw.end()) throw ConfigError("config: missing required key '" + key + "'");
    return it->second;
  }
  std::string get_or(const std::string& key, const std::string& fallback) const {
    return has(key) ? raw.at(key) : fallback;
  }

  int dimension() const {
    if (grid) return grid->n;
    return static_cast<int>(check.n);
  }

  const GridSpec& require_grid() const {
    if (!grid) throw ConfigError("config: grid.* keys are required for this command");
    return *grid;
  }

  OperatorSpec build_operator() const { return build_operator_kind(get_or("operator.kind", "heat"), true); }

  ExactSolution build_initial() const;

 private:
  OperatorSpec build_operator_kind(const std::string& kind, bool top) const;
};

namespace config {

inline std::vector<double> per_axis(const std::string& s, int n, const std::string& what) {
  const Eigen::VectorXd v = parse_vector(s, what);
  if (v.size() == 1) return std::vector<double>(static_cast<std::size_t>(n), v(0));
  if (v.size() != n) throw ConfigError(what + ": expected 1 or n = " + std::to_string(n) + " values");
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline ExperimentConfig from_text(const std::string& text) {
  ExperimentConfig c;
  c.raw = parse_flat(text);
  auto num = [&](const std::string& k, double fallback) {
    return c.has(k) ? parse_double(c.raw.at(k), k) : fallback;
  };
  auto positive = [&](const std::string& k, double v) {
    if (!(v > 0)) throw ConfigError(k + ": must be > 0");
    return v;
  };

  if (c.has("grid.n") || c.has("grid.points")) {
    GridSpec g;
    g.n = static_cast<int>(parse_int(c.get("grid.n"), "grid.n"));
    if (g.n < 1 || g.n > 3) throw ConfigError("grid.n: must be in 1..3");
    g.lo = per_axis(c.get_or("grid.lo", "0"), g.n, "grid.lo");
    g.hi = per_axis(c.get_or("grid.hi", "1"), g.n, "grid.hi");
    for (double v : per_axis(c.get("grid.points"), g.n, "grid.points")) {
      if (v != std::floor(v)) throw ConfigError("grid.points: must be integers");
      g.points.push_back(static_cast<int>(v));
    }
    g.dt = parse_double(c.get("grid.dt"), "grid.dt");
    g.t0 = num("grid.t0", 0.0);
    g.t1 = parse_double(c.get("grid.t1"), "grid.t1");
    g.validate();
    c.grid = g;
  }

  c.boundary = c.get_or("boundary.kind", "exact");
  if (c.boundary != "exact" && c.boundary != "frozen")
    throw ConfigError("boundary.kind: expected exact or frozen");
  c.method = c.get_or("solver.method", "explicit_euler");
  if (c.method != "explicit_euler" && c.method != "exact")
    throw ConfigError("solver.method: expected explicit_euler or exact");

  if (c.has("verify.l")) {
    const long l = parse_int(c.raw.at("verify.l"), "verify.l");
    if (l < 0) throw ConfigError("verify.l: must be >= 0");
    c.verify_l = static_cast<int>(l);
  }
  c.rank_tol = positive("verify.rank_tol", num("verify.rank_tol", kDefaultRankTol));
  c.case_tol = positive("verify.case_tol", num("verify.case_tol", kDefaultRankTol));
  if (c.has("verify.variants")) {
    c.variants.clear();
    for (const auto& v : split(c.raw.at("verify.variants"), ',')) c.variants.push_back(parse_phi_variant(v));
    if (c.variants.empty()) throw ConfigError("verify.variants: at least one variant required");
  }
  if (c.has("verify.margin")) {
    c.margin = static_cast<int>(parse_int(c.raw.at("verify.margin"), "verify.margin"));
    if (c.margin < 1) throw ConfigError("verify.margin: must be >= 1");
  }

  if (c.has("verify.first_frame")) {
    const long f = parse_int(c.raw.at("verify.first_frame"), "verify.first_frame");
    if (f < 1) throw ConfigError("verify.first_frame: must be >= 1");
    c.first_frame = static_cast<std::size_t>(f);
  }

  c.check.n = c.has("check.n") ? parse_int(c.raw.at("check.n"), "check.n") : (c.grid ? c.grid->n : 2);
  if (c.check.n < 1 || c.check.n > 8) throw ConfigError("check.n: must be in 1..8");
  if (c.grid && c.check.n != c.grid->n) throw ConfigError("check.n: must equal grid.n when both are given");
  if (c.has("check.points")) {
    const long v = parse_int(c.raw.at("check.points"), "check.points");
    if (v < 1) throw ConfigError("check.points: must be >= 1");
    c.check.num_points = static_cast<std::size_t>(v);
  }
  if (c.has("check.directions")) {
    const long v = parse_int(c.raw.at("check.directions"), "check.directions");
    if (v < 1) throw ConfigError("check.directions: must be >= 1");
    c.check.num_directions = static_cast<std::size_t>(v);
  }
  if (c.has("check.seed")) {
    const long v = parse_int(c.raw.at("check.seed"), "check.seed");
    if (v < 0) throw ConfigError("check.seed: must be >= 0");
    c.check.seed = static_cast<std::uint64_t>(v);
  }
  c.check.a_min = positive("check.a_min", num("check.a_min", c.check.a_min));
  c.check.a_max = positive("check.a_max", num("check.a_max", c.check.a_max));
  c.ellipticity_tol = num("check.ellipticity_tol", 0.0);
  if (c.ellipticity_tol < 0) throw ConfigError("check.ellipticity_tol: must be >= 0");

  c.output_dir = c.get_or("output.dir", "out");
  if (c.has("output.formats")) {
    c.formats.clear();
    for (const auto& f : split(c.raw.at("output.formats"), ',')) {
      if (f != "bin" && f != "csv" && f != "json") throw ConfigError("output.formats: unknown format '" + f + "'");
      c.formats.insert(f);
    }
  }

  // Surface operator and initial-data errors at load time.
  (void)c.build_operator();
  if (c.grid && c.has("initial.kind")) (void)c.build_initial();
  return c;
}

inline ExperimentConfig load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

}  // namespace config

inline OperatorSpec ExperimentConfig::build_operator_kind(const std::string& kind, bool top) const {
  const int n = dimension();
  auto int_key = [&](const std::string& k) { return static_cast<int>(config::parse_int(get(k), k)); };
  try {
    if (kind == "heat") return make_heat(n);
    if (kind == "linear") {
      const Eigen::MatrixXd a = config::parse_matrix(get("operator.coeff"), "operator.coeff");
      if (a.rows() != n || a.cols() != n)
        throw ConfigError("operator.coeff: expected a " + std::to_string(n) + "x" + std::to_string(n) + " matrix");
      std::optional<Eigen::VectorXd> drift;
      if (has("operator.drift")) drift = config::parse_vector(get("operator.drift"), "operator.drift");
      const double reaction = has("operator.reaction") ? config::parse_double(get("operator.reaction"), "operator.reaction") : 0.0;
      const double source = has("operator.source") ? config::parse_double(get("operator.source"), "operator.source") : 0.0;
      return make_linear(a, drift, reaction, source);
    }
    if (kind == "trace_minus_u2") return make_trace_minus_u_squared();

    // "hessian_power:2" and "hessian_quotient:3:1" name children inline.
    const auto parts = config::split(kind, ':');
    const std::string base = parts[0];
    if (base == "hessian_power") {
      const int k = parts.size() > 1 ? static_cast<int>(config::parse_int(parts[1], kind)) : int_key("operator.k");
      return make_hessian_power(k);
    }
    if (base == "hessian_quotient") {
      const int k = parts.size() > 1 ? static_cast<int>(config::parse_int(parts[1], kind)) : int_key("operator.k");
      const int l = parts.size() > 2 ? static_cast<int>(config::parse_int(parts[2], kind)) : int_key("operator.l");
      return make_hessian_quotient(k, l);
    }
    if (kind == "composition" && top) {
      const std::string gname = get_or("operator.g", "sum");
      ScalarG g;
      if (gname == "sum")
        g = g_sum();
      else if (gname == "identity")
        g = g_identity();
      else if (gname == "power")
        g = g_power(has("operator.alpha") ? config::parse_double(get("operator.alpha"), "operator.alpha") : 2.0);
      else
        throw ConfigError("operator.g: expected sum, identity or power");
      std::vector<OperatorSpec> children;
      for (const auto& child : config::split(get("operator.children"), ','))
        children.push_back(build_operator_kind(child, false));
      return compose(g, std::move(children));
    }
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("operator: ") + e.what());
  }
  throw ConfigError("operator.kind: unknown kind '" + kind + "'");
}

inline ExactSolution ExperimentConfig::build_initial() const {
  const int n = require_grid().n;
  const std::string kind = get("initial.kind");
  ExactSolution sol;
  const bool waves = kind == "exp_wave" || kind == "exp_wave+quadratic_drift";
  const bool quad = kind == "quadratic_drift" || kind == "exp_wave+quadratic_drift";
  if (!waves && !quad)
    throw ConfigError("initial.kind: expected exp_wave, quadratic_drift or exp_wave+quadratic_drift");
  if (waves) {
    // Several waves separated by ';' are summed.
    for (const auto& a : config::split(get("initial.a"), ';')) {
      const Eigen::VectorXd v = config::parse_vector(a, "initial.a");
      if (v.size() != n) throw ConfigError("initial.a: each wave needs n = " + std::to_string(n) + " entries");
      sol.terms.emplace_back(ExpWave{v});
    }
  }
  if (quad) {
    QuadraticDrift q;
    q.Q = config::parse_matrix(get("initial.Q"), "initial.Q");
    q.b = has("initial.b") ? config::parse_vector(get("initial.b"), "initial.b") : Eigen::VectorXd::Zero(n);
    q.c = has("initial.c") ? config::parse_double(get("initial.c"), "initial.c") : 0.0;
    sol.terms.emplace_back(q);
  }
  try {
    sol.validate(n);
  } catch (const ArgumentError& e) {
    throw ConfigError(std::string("initial: ") + e.what());
  }
  return sol;
}

/// Field from the config: the sampled closed form (method exact, heat only)
/// or an explicit Euler run started from it.
inline SolutionField produce_solution(const ExperimentConfig& cfg) {
  const GridSpec& grid = cfg.require_grid();
  const ExactSolution init = cfg.build_initial();
  const OperatorSpec spec = cfg.build_operator();
  if (cfg.method == "exact") {
    if (spec.label() != "heat")
      throw ConfigError("solver.method = exact samples heat closed forms; operator.kind must be heat");
    return exact_solution(init, grid);
  }
  const auto u0 = sample_frame(grid, grid.t0, init);
  const BoundarySpec bc = cfg.boundary == "exact" ? BoundarySpec::exact(init) : BoundarySpec::frozen();
  return solve(spec, u0, grid, bc);
}

/// Everything the run and verify commands report about one field.
struct VerificationResult {
  RankTimeline timeline;
  int l_used = 0;
  PhiVariant inequality_variant = PhiVariant::Simple;
  ResidualReport residual;
  std::vector<std::vector<double>> phi_simple;             // [frame][point]
  std::vector<std::vector<double>> phi_bg;                 // [frame][point]
  std::vector<std::vector<double>> psd_defect;             // [frame][point]
  std::vector<std::vector<std::optional<CaseReport>>> cases;
  std::size_t case1 = 0;
  std::size_t case2 = 0;
  std::size_t case_failures = 0;
  double max_case2_residual = 0.0;
  double max_psd_defect = 0.0;
};

/// l defaults to the smallest l(t) over all covered frames so that one
/// test function spans the whole run.
inline VerificationResult run_verification(const SolutionField& sol, const OperatorSpec& spec,
                                           const ExperimentConfig& cfg) {
  VerificationResult v;
  v.timeline = rank_timeline(sol, cfg.rank_tol, cfg.margin, cfg.first_frame);
  v.l_used = cfg.verify_l ? *cfg.verify_l : v.timeline.min_rank();
  if (v.l_used > sol.grid.n)
    throw ConfigError("verify.l: must be <= n = " + std::to_string(sol.grid.n));
  v.inequality_variant = cfg.variants.front();

  for (std::size_t f = 0; f < v.timeline.frames.size(); ++f) {
    const HessianField hf = hessian_field(sol, v.timeline.frames[f], cfg.margin);
    const std::size_t count = hf.hessians.size();
    std::vector<double> ps(count), pb(count), defect(count);
    std::vector<std::optional<CaseReport>> cases(count);
    parallel::for_each_index(count, [&](std::size_t i) {
      const auto& w = hf.hessians[i];
      ps[i] = phi_value(w, v.l_used, PhiVariant::Simple);
      pb[i] = phi_value(w, v.l_used, PhiVariant::BianGuan);
      defect[i] = w.psd_defect();
      try {
        cases[i] = classify_case(w, cfg.case_tol);
      } catch (const PreconditionError&) {
      } catch (const InconsistencyError&) {
      }
    });
    for (std::size_t i = 0; i < count; ++i) {
      v.max_psd_defect = std::max(v.max_psd_defect, defect[i]);
      if (!cases[i]) {
        ++v.case_failures;
      } else if (cases[i]->tag == CaseTag::Case1) {
        ++v.case1;
      } else {
        ++v.case2;
        v.max_case2_residual = std::max(v.max_case2_residual, cases[i]->residual);
      }
    }
    v.phi_simple.push_back(std::move(ps));
    v.phi_bg.push_back(std::move(pb));
    v.psd_defect.push_back(std::move(defect));
    v.cases.push_back(std::move(cases));
  }
  v.residual = diff_inequality(sol, spec, v.l_used, v.inequality_variant, cfg.margin, cfg.first_frame);
  return v;
}

inline std::string verification_csv(const SolutionField& sol, const VerificationResult& v) {
  std::ostringstream out;
  out << "frame,t,point_index,rank,case,gap,phi_simple,phi_bg,psd_defect,lhs,ratio\n";
  for (std::size_t f = 0; f < v.timeline.frames.size(); ++f) {
    const std::size_t m = v.timeline.frames[f];
    for (std::size_t i = 0; i < v.timeline.points.size(); ++i) {
      const auto& c = v.cases[f][i];
      out << m << ',' << format15(sol.time(m)) << ',' << v.timeline.points[i] << ',' << v.timeline.ranks[f][i] << ','
          << (c ? to_string(c->tag) : "NA") << ',' << (c ? format15(c->gap) : "") << ','
          << format15(v.phi_simple[f][i]) << ',' << format15(v.phi_bg[f][i]) << ',' << format15(v.psd_defect[f][i])
          << ',';
      const auto& lhs = v.residual.lhs[f][i];
      const auto& ratio = v.residual.ratio[f][i];
      out << (lhs ? format15(*lhs) : "") << ',' << (ratio ? format15(*ratio) : "") << '\n';
    }
  }
  return out.str();
}

inline nlohmann::json verification_json(const SolutionField& sol, const VerificationResult& v,
                                        const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["l_per_frame"] = v.timeline.l_per_frame;
  j["constancy"] = v.timeline.all_constant();
  j["monotone"] = v.timeline.monotone;
  j["sup_ratio"] = round15(v.residual.sup_ratio);
  j["max_case2_residual"] = round15(v.max_case2_residual);
  j["frames"] = v.timeline.frames;
  j["l_used"] = v.l_used;
  j["inequality_variant"] = to_string(v.inequality_variant);
  j["sup_lhs"] = round15(v.residual.sup_lhs);
  j["sup_abs_lhs"] = round15(v.residual.sup_abs_lhs);
  j["sup_abs_phi"] = round15(v.residual.sup_abs_phi);
  j["max_psd_defect"] = round15(v.max_psd_defect);
  j["case1_count"] = v.case1;
  j["case2_count"] = v.case2;
  j["case_failures"] = v.case_failures;
  j["rank_tol"] = round15(cfg.rank_tol);
  j["first_frame"] = cfg.first_frame;
  j["ratio_floor"] = ResidualReport::kFloor;
  j["n"] = sol.grid.n;
  j["points"] = sol.grid.points;
  j["dt"] = round15(sol.grid.dt);
  return j;
}

/// Writes the selected artifacts into dir; returns the paths written.
inline std::vector<std::string> write_artifacts(const std::string& dir, const SolutionField& sol,
                                                const VerificationResult& v, const ExperimentConfig& cfg,
                                                bool include_solution) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> written;
  const std::filesystem::path base(dir);
  if (include_solution && cfg.formats.count("bin")) {
    write_solution((base / "solution.bin").string(), sol);
    written.push_back((base / "solution.bin").string());
  }
  if (cfg.formats.count("csv")) {
    std::ofstream out(base / "verify.csv");
    out << verification_csv(sol, v);
    written.push_back((base / "verify.csv").string());
  }
  if (cfg.formats.count("json")) {
    std::ofstream out(base / "summary.json");
    out << verification_json(sol, v, cfg).dump(2) << "\n";
    written.push_back((base / "summary.json").string());
  }
  return written;
}

}  // namespace ranklab
