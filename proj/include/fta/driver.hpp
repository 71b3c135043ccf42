#pragma once

// Batch driver behind the riccati_cli tool: configuration, problem loading,
// synthetic generators and result files.

#include "fta/care.hpp"
#include "fta/dare.hpp"
#include "fta/mmio.hpp"
#include "fta/residual.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <string>

namespace fta {

enum class Equation { Dare, Care };

struct SyntheticSpec {
  std::string kind;  // laplacian1d_stable | laplacian1d_antistable | random_sparse
  Index n = 0, m = 1, l = 1;
};

struct RunConfig {
  Equation equation = Equation::Care;
  std::string a_path, b_path, c_path;
  std::optional<SyntheticSpec> synthetic;
  double gamma0 = 0.0;
  double shift_decay = 1.01;
  double gamma_min = 0.0;
  Index t = 32;
  double tau = 1e-12;
  double stop_tol = 1e-10;
  int max_rounds = 40;
  std::uint64_t seed = 1;
  int threads = 1;
  bool record_times = true;
  std::string out_dir = ".";
};

inline Equation parse_equation(const std::string& s) {
  if (s == "dare") return Equation::Dare;
  if (s == "care") return Equation::Care;
  throw ParseError("equation must be 'dare' or 'care', got '" + s + "'");
}

inline RunConfig config_from_json(const nlohmann::json& j) {
  RunConfig c;
  try {
    if (j.contains("equation")) c.equation = parse_equation(j.at("equation").get<std::string>());
    if (j.contains("A")) c.a_path = j.at("A").get<std::string>();
    if (j.contains("B")) c.b_path = j.at("B").get<std::string>();
    if (j.contains("C")) c.c_path = j.at("C").get<std::string>();
    if (j.contains("synthetic")) {
      const auto& s = j.at("synthetic");
      SyntheticSpec sp;
      sp.kind = s.at("kind").get<std::string>();
      sp.n = s.at("n").get<Index>();
      sp.m = s.value("m", Index{1});
      sp.l = s.value("l", Index{1});
      c.synthetic = sp;
    }
    c.gamma0 = j.value("gamma0", c.gamma0);
    c.shift_decay = j.value("shift_decay", c.shift_decay);
    c.gamma_min = j.value("gamma_min", c.gamma_min);
    c.t = j.value("t", c.t);
    c.tau = j.value("tau", c.tau);
    c.stop_tol = j.value("stop_tol", c.stop_tol);
    c.max_rounds = j.value("max_rounds", c.max_rounds);
    c.seed = j.value("seed", c.seed);
    c.threads = j.value("threads", c.threads);
    c.record_times = j.value("record_times", c.record_times);
    c.out_dir = j.value("out_dir", c.out_dir);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  return c;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path);
  try {
    return config_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
}

inline void validate(const RunConfig& c) {
  auto bad = [](const std::string& m) { throw ParseError("config: " + m); };
  if (c.t < 1) bad("t must be >= 1");
  if (c.max_rounds < 1) bad("max_rounds must be >= 1");
  if (!(c.stop_tol > 0.0)) bad("stop_tol must be positive");
  if (!(c.tau >= 0.0 && c.tau < 1.0)) bad("tau must lie in [0, 1)");
  if (!(c.shift_decay >= 1.0)) bad("shift_decay must be >= 1");
  if (c.gamma0 < 0.0) bad("gamma0 must be positive (or 0 for the default)");
  if (c.gamma_min < 0.0) bad("gamma_min must be >= 0");
  if (!c.synthetic && (c.a_path.empty() || c.b_path.empty() || c.c_path.empty())) {
    bad("either A/B/C paths or a synthetic block is required");
  }
}

// A, B, C of a seeded synthetic problem.
inline RiccatiProblem synthetic_problem(const SyntheticSpec& s, std::uint64_t seed) {
  if (s.n < 4) throw ParseError("synthetic: n must be >= 4");
  if (s.m < 1 || s.l < 1 || s.m > s.n || s.l > s.n) throw ParseError("synthetic: bad m or l");
  const Index n = s.n;
  std::mt19937_64 rng(seed);
  std::vector<Eigen::Triplet<double>> trip;
  if (s.kind == "laplacian1d_stable" || s.kind == "laplacian1d_antistable") {
    const double sg = s.kind == "laplacian1d_stable" ? 1.0 : -1.0;
    for (Index i = 0; i < n; ++i) {
      trip.emplace_back(i, i, -2.0 * sg);
      if (i + 1 < n) {
        trip.emplace_back(i, i + 1, sg);
        trip.emplace_back(i + 1, i, sg);
      }
    }
  } else if (s.kind == "random_sparse") {
    // About five off-diagonal entries per row; diagonally dominant with negative diagonal.
    std::uniform_int_distribution<Index> col(0, n - 1);
    std::normal_distribution<double> val(0.0, 1.0);
    Vec rowsum = Vec::Zero(n);
    for (Index i = 0; i < n; ++i) {
      for (int k = 0; k < 5; ++k) {
        const Index j = col(rng);
        if (j == i) continue;
        const double v = val(rng);
        trip.emplace_back(i, j, v);
        rowsum(i) += std::abs(v);
      }
    }
    for (Index i = 0; i < n; ++i) trip.emplace_back(i, i, -(rowsum(i) + 0.5));
  } else {
    throw ParseError("synthetic: unknown kind '" + s.kind + "'");
  }
  RiccatiProblem P;
  P.A.resize(n, n);
  P.A.setFromTriplets(trip.begin(), trip.end());
  P.A.makeCompressed();
  std::normal_distribution<double> nd(0.0, 1.0);
  P.B.resize(n, s.m);
  for (Index j = 0; j < s.m; ++j)
    for (Index i = 0; i < n; ++i) P.B(i, j) = nd(rng);
  P.C.resize(s.l, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < s.l; ++i) P.C(i, j) = nd(rng);
  return P;
}

struct ProblemFiles {
  std::string A, B, C;
};

// Writes A.mtx (coordinate), B.mtx and C.mtx (array, C as l x n) into dir.
inline ProblemFiles generate_synthetic(const SyntheticSpec& s, std::uint64_t seed, const std::string& dir) {
  const RiccatiProblem P = synthetic_problem(s, seed);
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  const std::filesystem::path d(dir);
  ProblemFiles f{(d / "A.mtx").string(), (d / "B.mtx").string(), (d / "C.mtx").string()};
  mm::write_sparse(f.A, P.A);
  mm::write_dense(f.B, P.B);
  mm::write_dense(f.C, P.C);
  return f;
}

inline RiccatiProblem load_problem(const RunConfig& c) {
  RiccatiProblem P;
  if (c.a_path.empty() && c.synthetic) {
    P = synthetic_problem(*c.synthetic, c.seed);
  } else {
    P.A = mm::read_sparse(c.a_path);
    P.B = mm::read_dense(c.b_path);
    P.C = mm::read_dense(c.c_path);
  }
  P.validate();
  return P;
}

struct RunOutcome {
  int exit_code = 0;
  bool converged = false;
  History history;
  LowRankFactor factor;
  std::string message;
};

inline std::string trace_csv(const History& h, bool record_times) {
  std::string out = "round,t,gamma,nres,rank,ms\n";
  char buf[256];
  for (const auto& r : h) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%ld,%.3f\n", r.round, r.t, r.gamma, r.nres,
                  static_cast<long>(r.rank), record_times ? r.ms : 0.0);
    out += buf;
  }
  return out;
}

// Solves, then writes summary.json, trace.csv and factor.mtx into c.out_dir.
// Exit codes: 0 converged, 1 input error, 2 no convergence or numerical failure.
inline RunOutcome run(const RunConfig& c) {
  RunOutcome o;
  RiccatiProblem P;
  try {
    validate(c);
    P = load_problem(c);
    std::filesystem::create_directories(c.out_dir);
  } catch (const std::exception& e) {
    o.exit_code = 1;
    o.message = std::string("input error: ") + e.what();
    return o;
  }
  Eigen::setNbThreads(std::max(1, c.threads));

  const auto t0 = std::chrono::steady_clock::now();
  bool zero_rhs = false;
  try {
    if (c.equation == Equation::Dare) {
      DareSolveOptions opt;
      opt.t = c.t;
      opt.tau = c.tau;
      opt.stop = c.stop_tol;
      opt.max_restarts = c.max_rounds;
      SolveResult r = fta_dare_solve(P, opt);
      o.factor = std::move(r.factor);
      o.history = std::move(r.history);
      zero_rhs = P.C.isZero(0.0);
    } else {
      CareSolveOptions opt;
      opt.gamma0 = c.gamma0;
      opt.t = c.t;
      opt.shift_decay = c.shift_decay;
      opt.gamma_min = c.gamma_min;
      opt.tau = c.tau;
      opt.stop = c.stop_tol;
      opt.max_rounds = c.max_rounds;
      CareResult r = fta_care_solve(P, opt);
      o.factor = std::move(r.factor);
      o.history = std::move(r.history);
      zero_rhs = r.zero_rhs;
    }
    o.converged = true;
    o.message = zero_rhs ? "C = 0: zero solution" : "converged";
  } catch (const NoConvergence& e) {
    o.factor = e.best();
    o.history = e.history();
    o.exit_code = 2;
    o.message = e.what();
  } catch (const Error& e) {
    o.exit_code = 2;
    o.message = std::string("numerical failure: ") + e.what();
    if (o.factor.S.cols() != P.n()) o.factor.S = Mat(0, P.n());
  }
  const double total_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();

  const std::filesystem::path dir(c.out_dir);
  try {
    nlohmann::json s;
    s["equation"] = c.equation == Equation::Dare ? "dare" : "care";
    s["converged"] = o.converged;
    s["message"] = o.message;
    s["n"] = P.n();
    s["m"] = P.m();
    s["l"] = P.l();
    s["t"] = c.t;
    s["rounds"] = o.history.size();
    s["rank"] = o.factor.rank();
    s["nres"] = o.history.empty() ? (zero_rhs ? 0.0 : 1.0) : o.history.back().nres;
    s["gamma_final"] = o.history.empty() ? 0.0 : o.history.back().gamma;
    s["total_ms"] = c.record_times ? total_ms : 0.0;
    s["exit_code"] = o.exit_code;
    std::ofstream(dir / "summary.json") << s.dump(2) << "\n";
    std::ofstream(dir / "trace.csv") << trace_csv(o.history, c.record_times);
    mm::write_dense((dir / "factor.mtx").string(), o.factor.S);
  } catch (const std::exception& e) {
    o.exit_code = 1;
    o.message = std::string("output error: ") + e.what();
  }
  return o;
}

}  // namespace fta
