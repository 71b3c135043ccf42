#pragma once

#include "fta/common.hpp"
#include "fta/fft_toeplitz.hpp"
#include "fta/pcg.hpp"
#include "fta/residual.hpp"
#include "fta/toeplitz_inverse.hpp"

#include <chrono>
#include <functional>

namespace fta {

inline constexpr double kStackBlowup = 1e150;

// Row-block power stack [R; R·Op; ...; R·Op^{count-1}] for a right-acting map.
inline Mat build_row_stack(const Mat& R, Index count, const std::function<Mat(const Mat&)>& step) {
  const Index p = R.rows();
  Mat out(p * count, R.cols());
  Mat cur = R;
  for (Index k = 0; k < count; ++k) {
    if (k > 0) cur = step(cur);
    const double nrm = cur.norm();
    if (!(nrm <= kStackBlowup)) {
      throw StackBlowup("Krylov block " + std::to_string(k) + " has norm above 1e150");
    }
    out.middleRows(k * p, p) = cur;
  }
  return out;
}

inline Mat right_apply(const SpMat& A, const Mat& R) {
  // R * A for a short, wide R.
  return (A.transpose() * R.transpose()).transpose();
}

// Holds [C; CA; ...; CA^t] once; Vt and VtA are overlapping views.
struct KrylovStack {
  Mat powers;  // (t+1) l x n
  Mat VB;      // V_{t-1} B, l(t-1) x m
  Index l = 0, t = 0;

  auto Vt() const { return powers.topRows(l * t); }
  auto VtA() const { return powers.bottomRows(l * t); }
  // V_{t-1} A: blocks CA..CA^{t-1}.
  auto Vtm1A() const { return powers.middleRows(l, l * (t - 1)); }
};

inline KrylovStack build_krylov_stack(const DareProblem& P, Index t) {
  P.validate();
  require_dims(t >= 1, "build_krylov_stack: t >= 1");
  KrylovStack s;
  s.l = P.l();
  s.t = t;
  s.powers = build_row_stack(P.C, t + 1, [&](const Mat& R) { return right_apply(P.A, R); });
  s.VB = s.powers.topRows(s.l * (t - 1)) * P.B;
  return s;
}

struct DareSweep {
  LowRankFactor factor;  // [C; S1; S2]
  StructuredInverse inverse;
  Mat S1, S2;
};

namespace detail {

inline DareSweep dare_sweep_from_stack(const DareProblem& P, const KrylovStack& st, const PcgConfig& cfg) {
  const Index l = P.l(), m = P.m(), t = st.t;
  DareSweep out;
  if (t == 1) {
    out.factor.S = P.C;
    out.S1.resize(0, P.n());
    out.S2.resize(0, P.n());
    return out;
  }
  Mat col = Mat::Zero(l * t, m);
  col.bottomRows(l * (t - 1)) = st.VB;
  out.inverse = build_structured_inverse(BlockToeplitzSpec::lower(col, l, t), SweepMode::Dare, cfg);
  std::tie(out.S1, out.S2) = out.inverse.apply(st.Vtm1A());
  out.factor.S.resize(l + out.S1.rows() + out.S2.rows(), P.n());
  out.factor.S << P.C, out.S1, out.S2;
  return out;
}

}  // namespace detail

// Factor of the t-th iterate of X <- C^T C + A^T X (I + B B^T X)^{-1} A from X_0 = 0.
inline DareSweep fta_dare_sweep_full(const DareProblem& P, Index t, const PcgConfig& cfg = {}) {
  return detail::dare_sweep_from_stack(P, build_krylov_stack(P, t), cfg);
}

inline LowRankFactor fta_dare_sweep(const DareProblem& P, Index t, const PcgConfig& cfg = {}) {
  return fta_dare_sweep_full(P, t, cfg).factor;
}

// Coupling terms of a sweep started from X_0 = Gamma^T Gamma.
struct ArbitraryInitState {
  Mat Gamma;
  Mat GammaAt;       // Gamma A^t
  Mat GammaUpsilon;  // Gamma [A^{t-1}B ... AB B]
  Mat WGamma;
  Mat XiGamma;
  Mat Xi1Gamma, Xi2Gamma;
};

// Same iterate as above but from X_0 = Gamma^T Gamma: appends W_Gamma^{-1/2} Xi_Gamma
// to the zero-start factor, where W_Gamma and Xi_Gamma are the Schur complement and
// coupling of the bordered matrix I + [T_t; Gamma Upsilon_t][...]^T.
inline LowRankFactor fta_dare_arbitrary(const DareProblem& P, const Mat& Gamma, Index t,
                                        const PcgConfig& cfg = {}, ArbitraryInitState* state = nullptr) {
  require_dims(Gamma.rows() == 0 || Gamma.cols() == P.n(), "fta_dare_arbitrary: Gamma must be g x n");
  const KrylovStack st = build_krylov_stack(P, t);
  DareSweep sw = detail::dare_sweep_from_stack(P, st, cfg);
  if (Gamma.rows() == 0 || Gamma.isZero(0.0)) return sw.factor;

  const Index g = Gamma.rows(), m = P.m(), l = P.l();
  // Gamma A^k B for k = 0..t-1, stored as Gamma Upsilon_t (reversed order).
  Mat GU(g, m * t);
  Mat cur = Gamma;
  for (Index k = 0; k < t; ++k) {
    GU.middleCols((t - 1 - k) * m, m) = cur * P.B;
    cur = right_apply(P.A, cur);
    if (!(cur.norm() <= kStackBlowup)) throw StackBlowup("Gamma A^k exceeds 1e150");
  }

  Mat WG = Mat::Identity(g, g) + GU * GU.transpose();
  Mat Xi = cur;  // Gamma A^t
  Mat P1, P2;
  if (t > 1) {
    // T_t Upsilon^T Gamma^T; the first block row of T_t is zero.
    Mat col = Mat::Zero(l * t, m);
    col.bottomRows(l * (t - 1)) = st.VB;
    const Mat F = bt_apply(BlockToeplitzSpec::lower(col, l, t), GU.transpose());
    std::tie(P1, P2) = sw.inverse.apply(F.bottomRows(l * (t - 1)));
    WG -= P1.transpose() * P1 + P2.transpose() * P2;
    Xi -= P1.transpose() * sw.S1 + P2.transpose() * sw.S2;
  }
  const auto llt = spd_cholesky(WG, "W_Gamma");
  const Mat rows = llt.matrixL().solve(Xi);

  if (state) {
    state->Gamma = Gamma;
    state->GammaAt = cur;
    state->GammaUpsilon = GU;
    state->WGamma = symmetrized(WG);
    state->XiGamma = Xi;
    state->Xi1Gamma = P1;
    state->Xi2Gamma = P2;
  }

  LowRankFactor out;
  out.S.resize(sw.factor.S.rows() + g, P.n());
  out.S << sw.factor.S, rows;
  return out;
}

// Minimal-row factor S' = U_k^T S keeping singular values > tau * sigma_max;
// S'^T S' <= S^T S since only PSD contributions are dropped.
inline LowRankFactor compress_factor(const LowRankFactor& f, double tau) {
  const Mat& S = f.S;
  const Index r = S.rows(), n = S.cols();
  if (r == 0) return f;
  Mat U;
  Vec sv;
  if (r <= n) {
    Eigen::HouseholderQR<Mat> qr(S.transpose());
    const Mat Rt = qr.matrixQR().topRows(r).triangularView<Eigen::Upper>().toDenseMatrix().transpose();
    Eigen::BDCSVD<Mat> svd(Rt, Eigen::ComputeFullU);
    U = svd.matrixU();
    sv = svd.singularValues();
  } else {
    Eigen::BDCSVD<Mat> svd(S, Eigen::ComputeThinU);
    U = svd.matrixU();
    sv = svd.singularValues();
  }
  if (sv.size() == 0 || sv(0) == 0.0) return LowRankFactor(Mat(0, n));
  Index k = 0;
  while (k < sv.size() && sv(k) > tau * sv(0)) ++k;
  return LowRankFactor(U.leftCols(k).transpose() * S);
}

struct DareSolveOptions {
  Index t = 32;
  double tau = 1e-12;
  double stop = 1e-10;
  int max_restarts = 20;
  PcgConfig pcg;
};

struct SolveResult {
  LowRankFactor factor;
  History history;
};

// Sweep, then restart from the compressed factor (X_0 = S'^T S' <= X_prev) until
// the relative residual drops below `stop`.
inline SolveResult fta_dare_solve(const DareProblem& P, const DareSolveOptions& opt = {}) {
  P.validate();
  SolveResult res;
  res.factor.S = Mat(0, P.n());
  if (P.C.isZero(0.0)) return res;
  for (int round = 1; round <= opt.max_restarts; ++round) {
    const auto t0 = std::chrono::steady_clock::now();
    LowRankFactor f = round == 1 ? fta_dare_sweep(P, opt.t, opt.pcg)
                                 : fta_dare_arbitrary(P, res.factor.S, opt.t, opt.pcg);
    res.factor = compress_factor(f, opt.tau);
    const double nres = nres_dare(res.factor, P).nres;
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    res.history.push_back({round, static_cast<int>(opt.t), 0.0, nres, res.factor.rank(), ms});
    if (nres <= opt.stop) return res;
  }
  throw NoConvergence("fta_dare_solve: no convergence within max_restarts", res.factor, res.history);
}

}  // namespace fta
