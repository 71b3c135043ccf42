// Acceptance checks. `acceptance` runs all criteria; `acceptance K` runs criterion K.
// Each criterion prints one line:  criterion K [PASS|FAIL] name: detail

#include "fta/driver.hpp"
#include "fta/fta.hpp"
#include "fta/oracles.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

using namespace fta;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

double rel(const Mat& a, const Mat& b) { return (a - b).norm() / std::max(b.norm(), 1e-300); }

CareProblem scalar_care() {
  CareProblem P;
  P.A = to_sparse(Mat::Constant(1, 1, -1.0));
  P.B = Mat::Ones(1, 1);
  P.C = Mat::Ones(1, 1);
  return P;
}

// Sizes for the small randomized instances.
struct Dims {
  Index n, m, l;
};

Dims random_dims(std::mt19937_64& rng) {
  std::uniform_int_distribution<Index> nd(4, 32), pd(1, 3);
  return {nd(rng), pd(rng), pd(rng)};
}

// 1. DARE sweep against the dense DRE.
Outcome dare_oracle_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const Dims d = random_dims(rng);
    const auto P = random_dare_instance(d.n, d.m, d.l, 1000 + k);
    const Mat A(P.A);
    for (int t : {1, 2, 4, 8, 16}) {
      const Mat Xd = dre_dense(A, P.B, P.C, Mat::Zero(d.n, d.n), t);
      worst = std::max(worst, rel(fta_dare_sweep(P, t).dense(), Xd));
    }
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 10.0, fmt("max rel err %.2e (tol 1e-9), %.2f s (limit 10 s)", worst, secs)};
}

// 2. H_k of the doubling recursion equals the sweep at t = 2^k.
Outcome sda_subsequence() {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto P = random_dare_instance(16 + 2 * static_cast<Index>(seed), 2, 2, 2000 + seed);
    const Mat A(P.A);
    SdaState s = sda_dare_init(A, P.B, P.C);
    for (int k = 0; k <= 4; ++k) {
      if (k > 0) s = sda_dense(s, 1);
      worst = std::max(worst, rel(fta_dare_sweep(P, Index{1} << k).dense(), s.Hk));
    }
  }
  return {worst <= 1e-8, fmt("max rel err %.2e over k <= 4 (tol 1e-8)", worst)};
}

// 3. Structured inverse times the dense matrix is the identity.
Outcome inversion_identity() {
  std::mt19937_64 rng(303);
  std::uniform_int_distribution<Index> pd(1, 3), td(1, 64);
  double worst = 0.0;
  for (int k = 0; k < 20; ++k) {
    const SweepMode mode = k % 2 ? SweepMode::Care : SweepMode::Dare;
    const Index p1 = pd(rng), p2 = pd(rng);
    Index t = td(rng);
    if (k < 4) t = k / 2 + 1;  // t = 1, 2 in both modes
    Mat col = random_gaussian(p1 * t, p2, rng) / std::sqrt(static_cast<double>(p1 * t));
    if (mode == SweepMode::Dare) col.topRows(p1).setZero();
    if (k == 4 || k == 5) col.setZero();              // T = 0
    if (k == 6 || k == 7) col.bottomRows(p1 * (t - 1)).setZero();  // only the leading block
    const auto spec = BlockToeplitzSpec::lower(col, p1, t);
    const auto inv = build_structured_inverse(spec, mode);
    if (inv.order() == 0) continue;
    Mat T;
    if (mode == SweepMode::Dare) {
      T = densify(BlockToeplitzSpec::lower(col.bottomRows(p1 * (t - 1)), p1, t - 1));
    } else {
      T = densify(spec);
    }
    const Mat R = Mat::Identity(T.rows(), T.rows()) + T * T.transpose();
    const Mat I = Mat::Identity(R.rows(), R.rows());
    worst = std::max(worst, (inv.dense() * R - I).norm() / I.norm());
  }
  return {worst <= 1e-9, fmt("max ||R^-1 R - I||_F / ||I||_F = %.2e (tol 1e-9)", worst)};
}

// 4. Iterates never decrease.
Outcome monotone_convergence() {
  double worst = 0.0;  // most negative normalized eigenvalue
  auto track = [&](const LowRankFactor& a, const LowRankFactor& b) {
    const double scale = std::max(b.dense().norm(), 1e-300);
    worst = std::min(worst, min_eig_difference(a, b) / scale);
  };
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const auto P = random_dare_instance(20, 2, 2, 4000 + seed);
    LowRankFactor prev = fta_dare_sweep(P, 1);
    for (Index t = 2; t <= 16; ++t) {
      LowRankFactor cur = fta_dare_sweep(P, t);
      track(prev, cur);
      prev = std::move(cur);
    }
    const auto Q = random_care_instance(20, 2, 2, 4100 + seed);
    const auto sys = cayley_transform(Q, 0.8);
    prev = fta_care_sweep(sys, Q.C, 1).factor;
    for (Index t = 2; t <= 16; ++t) {
      LowRankFactor cur = fta_care_sweep(sys, Q.C, t).factor;
      track(prev, cur);
      prev = std::move(cur);
    }
  }
  // Incorporated CARE rounds with a decaying shift.
  const auto Q = random_care_instance(24, 2, 2, 4200);
  CareSolveOptions opt;
  opt.gamma0 = 1.0;
  opt.t = 2;
  opt.shift_decay = 1.3;
  opt.tau = 0.0;
  opt.stop = 1e-300;
  opt.max_rounds = 8;
  LowRankFactor prev(Mat(0, Q.n()));
  for (int r = 1; r <= opt.max_rounds; ++r) {
    CareSolveOptions o = opt;
    o.max_rounds = r;
    LowRankFactor cur;
    try {
      cur = fta_care_solve(Q, o).factor;
    } catch (const NoConvergence& e) {
      cur = e.best();
    }
    if (prev.rank() > 0) track(prev, cur);
    prev = std::move(cur);
  }
  return {worst >= -1e-10, fmt("min normalized eig(X_{t+1} - X_t) = %.2e (tol -1e-10)", worst)};
}

// 5. The residual factor reproduces the dense residual.
Outcome residual_factorization() {
  double worst = 0.0, worst_abs = 0.0;
  for (std::uint64_t seed = 1; seed <= 6; ++seed) {
    const auto P = random_care_instance(8 + 4 * static_cast<Index>(seed), 2, 2, 5000 + seed);
    const Mat A(P.A);
    const auto sys = cayley_transform(P, 0.5 + 0.25 * static_cast<double>(seed));
    for (Index t : {1, 2, 4, 8}) {
      const auto sw = fta_care_sweep(sys, P.C, t);
      const Mat Ct = residual_factor(sys, sw, P.C);
      const Mat R = care_residual_dense(A, P.B, P.C, sw.factor.dense());
      worst = std::max(worst, rel(Ct.transpose() * Ct, R));
      worst_abs = std::max(worst_abs, (Ct.transpose() * Ct - R).norm() / (P.C.transpose() * P.C).norm());
    }
  }
  // Round-level residual factors of the outer loop.
  const auto P = random_care_instance(24, 2, 2, 5100);
  const Mat A(P.A);
  LowRankFactor acc(Mat(0, P.n()));
  Mat Ct = P.C;
  double gamma = 1.0;
  for (int round = 0; round < 3; ++round) {
    Mat K = (acc.S * P.B).transpose() * acc.S;
    const auto sys = cayley_transform(P, gamma, K);
    const auto sw = fta_care_sweep(sys, Ct, 4);
    Ct = residual_factor(sys, sw, Ct);
    Mat st(acc.rank() + sw.factor.rank(), P.n());
    st << acc.S, sw.factor.S;
    acc = LowRankFactor(st);
    const Mat R = care_residual_dense(A, P.B, P.C, acc.dense());
    worst = std::max(worst, rel(Ct.transpose() * Ct, R));
    worst_abs = std::max(worst_abs, (Ct.transpose() * Ct - R).norm() / (P.C.transpose() * P.C).norm());
    gamma /= 1.5;
  }
  return {worst <= 1e-8, fmt("max rel ||C(X_t) - C_t^T C_t||_F = %.2e (tol 1e-8), max abs / ||C^T C||_F = %.2e", worst,
                                   worst_abs)};
}

// 6. X_{t+1} - X_t equals the closed-form increment.
Outcome step_identity() {
  double worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto P = random_care_instance(16, 2, 2, 6000 + seed);
    const double g = 0.4 * static_cast<double>(seed);
    const auto sys = cayley_transform(P, g);
    for (Index t : {1, 2, 4, 8}) {
      const auto sw = fta_care_sweep(sys, P.C, t);
      const Mat D = radi_delta_check(P, sw.factor, residual_factor(sys, sw, P.C), g);
      const Mat Xn = fta_care_sweep(sys, P.C, t + 1).factor.dense();
      worst = std::max(worst, (Xn - sw.factor.dense() - D).norm() / Xn.norm());
    }
  }
  return {worst <= 1e-9, fmt("max ||(X_{t+1} - X_t) - Delta_t|| / ||X_{t+1}|| = %.2e (tol 1e-9)", worst)};
}

// 7. Scalar CARE with A = -1, B = C = 1.
Outcome scalar_closed_forms() {
  const auto P = scalar_care();
  const auto sys = cayley_transform(P, 1.0);
  const auto sw = fta_care_sweep(sys, P.C, 1);
  const double x1 = sw.factor.dense()(0, 0);
  const double c1 = residual_factor(sys, sw, P.C)(0, 0);
  CareSolveOptions opt;
  opt.gamma0 = 1.0;
  opt.t = 8;
  const double x = fta_care_solve(P, opt).factor.dense()(0, 0);
  const double ex = std::abs(x - (std::sqrt(2.0) - 1.0));
  const bool ok = ex <= 1e-10 && std::abs(x1 - 0.4) <= 1e-12 && std::abs(c1 - 0.2) <= 1e-12;
  return {ok, fmt("|X - (sqrt2 - 1)| = %.2e (tol 1e-10), X1 = %.15f, C1 = %.15f", ex, x1, c1)};
}

std::string history_tail(const History& h) {
  std::ostringstream os;
  os << "rounds " << h.size();
  if (!h.empty()) os << ", last nres " << h.back().nres << ", gamma " << h.back().gamma;
  return os.str();
}

// Runs fta_care_solve on a synthetic problem and reports (converged-to-tol, seconds, history).
struct BigRun {
  History history;
  double seconds = 0.0;
  std::string error;
};

BigRun big_care_run(const SyntheticSpec& spec, const CareSolveOptions& opt) {
  const auto P = synthetic_problem(spec, 1);
  BigRun r;
  const auto t0 = Clock::now();
  try {
    r.history = fta_care_solve(P, opt).history;
  } catch (const NoConvergence& e) {
    r.history = e.history();
  } catch (const Error& e) {
    r.error = e.what();
  }
  r.seconds = seconds_since(t0);
  return r;
}

// 8. Anti-stable Laplacian, n = 5000.
Outcome antistable_robustness() {
  CareSolveOptions opt;
  opt.gamma0 = 8.0;
  opt.t = 32;
  opt.max_rounds = 40;
  opt.stop = 1e-6;
  const BigRun r = big_care_run({"laplacian1d_antistable", 5000, 4, 4}, opt);
  const double nres = r.history.empty() ? 1.0 : r.history.back().nres;
  const bool ok = r.error.empty() && nres <= 1e-6 && r.seconds < 120.0;
  std::string d = fmt("nres %.2e (tol 1e-6), %.1f s (limit 120 s); ", nres, r.seconds) + history_tail(r.history);
  if (!r.error.empty()) d += "; error: " + r.error;
  return {ok, d};
}

// 9. Stable Laplacian, n = 10000, through the CLI driver.
Outcome stable_benchmark() {
  RunConfig c;
  c.equation = Equation::Care;
  c.synthetic = SyntheticSpec{"laplacian1d_stable", 10000, 4, 4};
  c.seed = 1;
  c.gamma0 = 20.0;
  c.shift_decay = 3.0;
  c.gamma_min = 0.01;
  c.t = 32;
  c.max_rounds = 40;
  c.stop_tol = 1e-8;
  c.out_dir = (fs::temp_directory_path() / "fta_acceptance_9").string();
  const auto t0 = Clock::now();
  const RunOutcome o = run(c);
  const double secs = seconds_since(t0);
  // Strictly decreasing nres from round 2 on, read back from trace.csv.
  std::ifstream in(fs::path(c.out_dir) / "trace.csv");
  std::string line;
  std::getline(in, line);
  std::vector<double> nres;
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string cell;
    for (int k = 0; k < 4; ++k) std::getline(ss, cell, ',');
    nres.push_back(std::stod(cell));
  }
  bool decreasing = true;
  for (std::size_t k = 2; k < nres.size(); ++k) decreasing = decreasing && nres[k] < nres[k - 1];
  const double last = nres.empty() ? 1.0 : nres.back();
  const bool ok = o.exit_code == 0 && last <= 1e-8 && secs < 120.0 && decreasing;
  return {ok, fmt("nres %.2e (tol 1e-8), %.1f s (limit 120 s), ", last, secs) +
                  (decreasing ? "strictly decreasing after round 2" : "NOT strictly decreasing after round 2") +
                  ", " + history_tail(o.history)};
}

// 10. Sweep time from t = 64 to t = 128 at n = 10000.
Outcome complexity_scaling() {
  const auto P = synthetic_problem({"laplacian1d_stable", 10000, 4, 4}, 1);
  const auto sys = cayley_transform(P, 4.0);
  auto best_time = [&](Index t) {
    double best = 1e300;
    for (int rep = 0; rep < 3; ++rep) {
      const auto t0 = Clock::now();
      const auto sw = fta_care_sweep(sys, P.C, t);
      best = std::min(best, seconds_since(t0));
      if (sw.factor.rank() == 0) best = 1e300;
    }
    return best;
  };
  const double a = best_time(64), b = best_time(128);
  return {b / a <= 3.0, fmt("sweep t=64 %.3f s, t=128 %.3f s, ratio %.2f (limit 3)", a, b, b / a)};
}

// 11. Randomized FFT matvecs against densified products.
Outcome fft_matvec() {
  std::mt19937_64 rng(1111);
  std::uniform_int_distribution<Index> pd(1, 3), td(1, 64), qd(1, 4);
  double worst = 0.0;
  for (int k = 0; k < 200; ++k) {
    const Index p1 = pd(rng), p2 = pd(rng), t = td(rng), q = qd(rng);
    const auto o = k % 2 ? Orientation::UpperFromColumn : Orientation::LowerFromColumn;
    const BlockToeplitzSpec T(random_gaussian(p1 * t, p2, rng), p1, t, o);
    const Mat D = densify(T);
    if (k % 4 < 2) {
      const Mat X = random_gaussian(p2 * t, q, rng);
      worst = std::max(worst, rel(bt_apply(T, X), D * X));
    } else {
      const Mat X = random_gaussian(p1 * t, q, rng);
      worst = std::max(worst, rel(bt_apply_transpose(T, X), D.transpose() * X));
    }
  }
  return {worst <= 1e-11, fmt("max rel err %.2e over 200 checks (tol 1e-11)", worst)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Drops the trailing ms column of every trace row.
std::string without_times(const std::string& csv) {
  std::istringstream in(csv);
  std::string line, out;
  while (std::getline(in, line)) out += line.substr(0, line.rfind(',')) + "\n";
  return out;
}

// 12. Two runs of a seeded config give the same trace.
Outcome determinism() {
  const fs::path root = fs::temp_directory_path() / "fta_acceptance_12";
  fs::remove_all(root);
  bool ok = true;
  std::string what;
  for (bool times : {false, true}) {
    for (Equation eq : {Equation::Care, Equation::Dare}) {
      RunConfig c;
      c.equation = eq;
      c.synthetic = SyntheticSpec{"random_sparse", 400, 3, 2};
      c.seed = 77;
      c.gamma0 = 2.0;
      c.t = 16;
      c.max_rounds = 4;
      c.record_times = times;
      const std::string tag = std::string(eq == Equation::Care ? "care" : "dare") + (times ? "_ms" : "");
      c.out_dir = (root / (tag + "_a")).string();
      run(c);
      c.out_dir = (root / (tag + "_b")).string();
      run(c);
      const std::string a = slurp(root / (tag + "_a") / "trace.csv");
      const std::string b = slurp(root / (tag + "_b") / "trace.csv");
      const bool same = times ? without_times(a) == without_times(b) : a == b;
      const bool fac = slurp(root / (tag + "_a") / "factor.mtx") == slurp(root / (tag + "_b") / "factor.mtx");
      ok = ok && same && fac && !a.empty();
      what += tag + (same && fac ? " identical; " : " DIFFERENT; ");
    }
  }
  return {ok, what + "(ms column excluded when timing is recorded)"};
}

struct Criterion {
  const char* name;
  std::function<Outcome()> check;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all = {
      {"dare oracle equivalence", dare_oracle_equivalence},
      {"sda subsequence identity", sda_subsequence},
      {"structured inversion identity", inversion_identity},
      {"monotone convergence", monotone_convergence},
      {"residual factorization", residual_factorization},
      {"step identity", step_identity},
      {"scalar care closed forms", scalar_closed_forms},
      {"anti-stable robustness (n=5000)", antistable_robustness},
      {"stable benchmark (n=10000)", stable_benchmark},
      {"complexity scaling t=64 -> 128", complexity_scaling},
      {"fft matvec correctness", fft_matvec},
      {"determinism", determinism},
  };
  std::vector<int> which;
  for (int i = 1; i < argc; ++i) which.push_back(std::atoi(argv[i]));
  if (which.empty())
    for (int k = 1; k <= static_cast<int>(all.size()); ++k) which.push_back(k);

  int failed = 0;
  for (int k : which) {
    if (k < 1 || k > static_cast<int>(all.size())) {
      std::fprintf(stderr, "unknown criterion %d\n", k);
      return 2;
    }
    Outcome o;
    try {
      o = all[k - 1].check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %2d [%s] %s: %s\n", k, o.pass ? "PASS" : "FAIL", all[k - 1].name, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed == 0 ? 0 : 1;
}
