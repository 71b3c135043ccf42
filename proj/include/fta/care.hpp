#pragma once

#include "fta/common.hpp"
#include "fta/dare.hpp"
#include "fta/fft_toeplitz.hpp"
#include "fta/pcg.hpp"
#include "fta/residual.hpp"
#include "fta/toeplitz_inverse.hpp"

#include <Eigen/SparseLU>

#include <chrono>
#include <cmath>
#include <memory>
#include <string>

namespace fta {

// Solves with A - B K - gamma I through one sparse LU of A - gamma I and a
// Sherman-Morrison-Woodbury correction of rank m (K may have zero rows).
class ShiftedSolver {
 public:
  ShiftedSolver(const SpMat& A, double gamma, const Mat& B, const Mat& K) : gamma_(gamma), B_(B) {
    const Index n = A.rows();
    SpMat I(n, n);
    I.setIdentity();
    SpMat Ah = A - gamma * I;
    Ah.makeCompressed();
    lu_.analyzePattern(Ah);
    lu_.factorize(Ah);
    if (lu_.info() != Eigen::Success) {
      throw SingularShift("A - gamma I is singular for gamma = " + std::to_string(gamma));
    }
    if (K.rows() > 0 && !K.isZero(0.0)) {
      K_ = K;
      AiB_ = base_right(B);
      KAi_ = base_left(K);
      const Mat cap = Mat::Identity(K.rows(), K.rows()) - K * AiB_;
      cap_.compute(cap);
      capT_.compute(cap.transpose());
      if (!(std::abs(cap_.determinant()) > 0.0) || !cap_.matrixLU().allFinite()) {
        throw SingularShift("closed-loop shifted matrix is singular");
      }
      feedback_ = true;
    }
  }

  double gamma() const { return gamma_; }

  // (A - BK - gamma I)^{-1} X
  Mat solve_right(const Mat& X) const {
    Mat Y = base_right(X);
    if (feedback_) Y += AiB_ * cap_.solve(K_ * Y);
    check(Y);
    return Y;
  }

  // R (A - BK - gamma I)^{-1}
  Mat solve_left(const Mat& R) const {
    Mat Z = base_left(R);
    if (feedback_) {
      // (Z B) cap^{-1} K A^{-1} with cap^{-1} applied from the right.
      const Mat ZB = Z * B_;
      Z += capT_.solve(Mat(ZB.transpose())).transpose() * KAi_;
    }
    check(Z);
    return Z;
  }

 private:
  Mat base_right(const Mat& X) const { return lu_.solve(X); }
  Mat base_left(const Mat& R) const {
    const Mat Rt = R.transpose();
    return Mat(lu_.transpose().solve(Rt)).transpose();
  }

  static void check(const Mat& Y) {
    if (!Y.allFinite()) throw SingularShift("non-finite shifted solve");
  }

 private:
  double gamma_;
  Mat B_;
  mutable Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_;
  bool feedback_ = false;
  Mat K_, AiB_, KAi_;
  Eigen::PartialPivLU<Mat> cap_, capT_;
};

// DARE data produced by the Cayley map with shift gamma:
// Atilde = I + 2 gamma Ahat^{-1} (applied from the right), Btilde = sqrt(2 gamma) Ahat^{-1} B,
// Ctilde = sqrt(2 gamma) C Ahat^{-1}, Ygamma = C Ahat^{-1} B, with Ahat = A - B K - gamma I.
struct CayleySystem {
  double gamma = 0.0;
  std::shared_ptr<const ShiftedSolver> shifted_solve;
  Mat B;
  Mat Btilde;
  Mat Ctilde;
  Mat Ygamma;

  Mat atilde_apply(const Mat& V) const { return V + 2.0 * gamma * shifted_solve->solve_left(V); }

  // (Ctilde, Ygamma) for another right-hand factor C.
  std::pair<Mat, Mat> transform_output(const Mat& C, const Mat& B) const {
    const Mat CAi = shifted_solve->solve_left(C);
    return {std::sqrt(2.0 * gamma) * CAi, CAi * B};
  }
};

// Cayley transform of the CARE with data (A - B K, B, C); K = 0 gives the plain problem.
inline CayleySystem cayley_transform(const CareProblem& P, double gamma, const Mat& K = Mat()) {
  P.validate();
  if (!(gamma > 0.0)) throw SingularShift("shift must be positive");
  auto solver = std::make_shared<ShiftedSolver>(P.A, gamma, P.B, K.rows() ? K : Mat(0, P.n()));
  CayleySystem sys;
  sys.gamma = gamma;
  sys.shifted_solve = solver;
  sys.B = P.B;
  sys.Btilde = std::sqrt(2.0 * gamma) * solver->solve_right(P.B);
  std::tie(sys.Ctilde, sys.Ygamma) = sys.transform_output(P.C, P.B);
  return sys;
}

struct CareSweep {
  LowRankFactor factor;  // [S1; S2]
  StructuredInverse inverse;
  Mat Vt;  // Ctilde-stack [Ct; Ct At; ...], l t x n
  Mat S1, S2;
  Mat Ctilde, Ygamma;
  Index t = 0;
};

// t-th iterate of the Cayley DRE for the output factor C_current.
inline CareSweep fta_care_sweep(const CayleySystem& sys, const Mat& C_current, Index t,
                                const PcgConfig& cfg = {}) {
  require_dims(t >= 1, "fta_care_sweep: t >= 1");
  const Index l = C_current.rows(), m = sys.Btilde.cols();
  CareSweep out;
  out.t = t;
  out.Ctilde = std::sqrt(2.0 * sys.gamma) * sys.shifted_solve->solve_left(C_current);
  out.Ygamma = out.Ctilde * sys.B / std::sqrt(2.0 * sys.gamma);
  out.Vt = build_row_stack(out.Ctilde, t, [&](const Mat& R) { return sys.atilde_apply(R); });
  Mat col(l * t, m);
  col.topRows(l) = out.Ygamma;
  if (t > 1) col.bottomRows(l * (t - 1)) = out.Vt.topRows(l * (t - 1)) * sys.Btilde;
  out.inverse = build_structured_inverse(BlockToeplitzSpec::lower(col, l, t), SweepMode::Care, cfg);
  std::tie(out.S1, out.S2) = out.inverse.apply(out.Vt);
  out.factor.S.resize(out.S1.rows() + out.S2.rows(), out.Vt.cols());
  out.factor.S << out.S1, out.S2;
  return out;
}

// C_t = C + sqrt(2 gamma) (1_t^T (x) I) (I + T T^T)^{-1} V_t, so that the residual of the
// sweep iterate equals C_t^T C_t.
inline Mat residual_factor(const CayleySystem& sys, const CareSweep& sw, const Mat& C_in) {
  require_dims(sw.Vt.cols() == C_in.cols(), "residual_factor: width");
  if (sw.t == 0) return C_in;
  const Index l = C_in.rows();
  Mat ones(l * sw.t, l);
  for (Index k = 0; k < sw.t; ++k) ones.middleRows(k * l, l).setIdentity();
  const auto [X1, X2] = sw.inverse.apply(ones);
  return C_in + std::sqrt(2.0 * sys.gamma) * (X1.transpose() * sw.S1 + X2.transpose() * sw.S2);
}

// Dense Delta_t = 2 gamma Z^T (I + Z B B^T Z^T)^{-1} Z, Z = C_t (A - B B^T X_t - gamma I)^{-1}.
inline Mat radi_delta_check(const CareProblem& P, const LowRankFactor& X, const Mat& Ct, double gamma) {
  const Index n = P.n();
  require_dims(n <= 64, "radi_delta_check: small instances only");
  const Mat Ad = Mat(P.A);
  const Mat Xd = X.S.rows() ? X.dense() : Mat::Zero(n, n);
  const Mat Atg = Ad - P.B * P.B.transpose() * Xd - gamma * Mat::Identity(n, n);
  Eigen::FullPivLU<Mat> lu(Atg);
  if (!lu.isInvertible()) throw SingularClosedLoop("A - B B^T X - gamma I is singular");
  const Mat Z = Ct * lu.inverse();
  const Mat ZB = Z * P.B;
  const Mat inner = Mat::Identity(Ct.rows(), Ct.rows()) + ZB * ZB.transpose();
  return 2.0 * gamma * Z.transpose() * inner.ldlt().solve(Z);
}

struct CareSolveOptions {
  double gamma0 = 0.0;  // 0: max(1e-6, 0.1 ||A||_1 / n)
  Index t = 32;
  double shift_decay = 1.01;
  double gamma_min = 0.0;  // > 0: restart the schedule at gamma0 once gamma would drop below
  double tau = 1e-12;
  double stop = 1e-10;
  int max_rounds = 40;
  PcgConfig pcg;
};

inline double default_gamma0(const CareProblem& P) {
  double norm1 = 0.0;
  for (Index j = 0; j < P.A.outerSize(); ++j) {
    double s = 0.0;
    for (SpMat::InnerIterator it(P.A, j); it; ++it) s += std::abs(it.value());
    norm1 = std::max(norm1, s);
  }
  return std::max(1e-6, 0.1 * norm1 / static_cast<double>(P.n()));
}

struct CareResult {
  LowRankFactor factor;
  History history;
  Mat Ct;  // residual factor of the final round
  bool zero_rhs = false;
};

// Incorporation loop: each round runs a sweep on (A - B B^T X_acc, B, C_round),
// accumulates the increment, and continues on the residual factor.
inline CareResult fta_care_solve(const CareProblem& P, const CareSolveOptions& opt = {}) {
  P.validate();
  if (!(opt.shift_decay >= 1.0)) throw Error("shift_decay must be >= 1");
  CareResult res;
  res.factor.S = Mat(0, P.n());
  res.Ct = P.C;
  if (P.C.isZero(0.0)) {
    res.zero_rhs = true;
    return res;
  }
  const double gamma0 = opt.gamma0 > 0.0 ? opt.gamma0 : default_gamma0(P);
  double gamma = gamma0;

  for (int round = 1; round <= opt.max_rounds; ++round) {
    const auto t0 = std::chrono::steady_clock::now();
    Mat K(0, P.n());
    if (res.factor.rank() > 0) K = (res.factor.S * P.B).transpose() * res.factor.S;
    CayleySystem sys;
    try {
      sys = cayley_transform(P, gamma, K);
    } catch (const SingularShift&) {
      gamma *= 1.5;
      sys = cayley_transform(P, gamma, K);
    }
    const CareSweep sw = fta_care_sweep(sys, res.Ct, opt.t, opt.pcg);
    res.Ct = residual_factor(sys, sw, res.Ct);
    Mat stacked(res.factor.rank() + sw.factor.rank(), P.n());
    stacked << res.factor.S, sw.factor.S;
    res.factor = compress_factor(LowRankFactor(std::move(stacked)), opt.tau);
    const double nres = nres_care(res.factor, P).nres;
    const double ms =
        std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    res.history.push_back({round, static_cast<int>(opt.t), gamma, nres, res.factor.rank(), ms});
    if (nres <= opt.stop) return res;
    gamma /= opt.shift_decay;
    if (gamma < opt.gamma_min) gamma = gamma0;
  }
  throw NoConvergence("fta_care_solve: no convergence within max_rounds", res.factor, res.history);
}

}  // namespace fta
