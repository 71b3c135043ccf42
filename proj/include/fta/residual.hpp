#pragma once

#include "fta/common.hpp"

#include <cmath>
#include <limits>

namespace fta {

// Data of  A^T X + X A - X B B^T X + C^T C = 0  (continuous) or
//         -X + A^T X (I + B B^T X)^{-1} A + C^T C = 0  (discrete).
struct RiccatiProblem {
  SpMat A;
  Mat B;
  Mat C;

  Index n() const { return A.rows(); }
  Index m() const { return B.cols(); }
  Index l() const { return C.rows(); }

  void validate() const {
    require_dims(A.rows() == A.cols(), "A must be square");
    require_dims(B.rows() == n(), "B must have n rows");
    require_dims(C.cols() == n(), "C must have n columns");
    require_dims(m() <= n() && l() <= n(), "m, l must not exceed n");
  }
};

using DareProblem = RiccatiProblem;
using CareProblem = RiccatiProblem;

struct ResidualReport {
  double nres = 0.0;
  double absolute_frobenius = 0.0;
  Index gram_dim = 0;
};

namespace detail {

// ||K^T M K||_F via a thin QR of K^T: K^T = Q R gives ||R M R^T||_F. Unlike the
// Gram-trace form trace(M G M G) this has no sqrt(eps) cancellation floor.
inline double gram_norm(const Mat& K, const Mat& M) {
  if (K.rows() == 0) return 0.0;
  Eigen::HouseholderQR<Mat> qr(K.transpose());
  const Index k = std::min(K.rows(), K.cols());
  const Mat R = qr.matrixQR().topRows(k).template triangularView<Eigen::Upper>();
  const double v = (R * M * R.transpose()).norm();
  if (!std::isfinite(v)) throw NumericalInconsistency("non-finite residual norm");
  return v;
}

inline double rhs_norm(const Mat& C) {
  const double c = (C * C.transpose()).norm();  // ||C^T C||_F
  if (c == 0.0) throw ZeroRhs("C = 0: relative residual undefined");
  return c;
}

}  // namespace detail

// Relative CARE residual of X = S^T S, K = [C; S; SA],
// M = [I 0 0; 0 -(SB)(SB)^T I; 0 I 0].
inline ResidualReport nres_care(const LowRankFactor& f, const CareProblem& P) {
  const double denom = detail::rhs_norm(P.C);
  require_dims(f.S.cols() == P.n() || f.S.rows() == 0, "nres_care: factor width");
  const Index l = P.l(), r = f.S.rows(), n = P.n();
  Mat K(l + 2 * r, n);
  K.topRows(l) = P.C;
  if (r > 0) {
    K.middleRows(l, r) = f.S;
    K.bottomRows(r) = (P.A.transpose() * f.S.transpose()).transpose();
  }
  Mat M = Mat::Zero(l + 2 * r, l + 2 * r);
  M.topLeftCorner(l, l).setIdentity();
  if (r > 0) {
    const Mat SB = f.S * P.B;
    M.block(l, l, r, r) = -SB * SB.transpose();
    M.block(l, l + r, r, r).setIdentity();
    M.block(l + r, l, r, r).setIdentity();
  }
  ResidualReport rep;
  rep.gram_dim = l + 2 * r;
  rep.absolute_frobenius = detail::gram_norm(K, M);
  rep.nres = rep.absolute_frobenius / denom;
  return rep;
}

// Relative DARE residual of X = S^T S using X (I + B B^T X)^{-1} = S^T (I + SB (SB)^T)^{-1} S:
// K = [C; S; SA], M = diag(I, -I, (I + SB (SB)^T)^{-1}).
inline ResidualReport nres_dare(const LowRankFactor& f, const DareProblem& P) {
  const double denom = detail::rhs_norm(P.C);
  require_dims(f.S.cols() == P.n() || f.S.rows() == 0, "nres_dare: factor width");
  const Index l = P.l(), r = f.S.rows(), n = P.n();
  Mat K(l + 2 * r, n);
  K.topRows(l) = P.C;
  Mat M = Mat::Zero(l + 2 * r, l + 2 * r);
  M.topLeftCorner(l, l).setIdentity();
  if (r > 0) {
    K.middleRows(l, r) = f.S;
    K.bottomRows(r) = (P.A.transpose() * f.S.transpose()).transpose();
    const Mat SB = f.S * P.B;
    const Mat N = Mat::Identity(r, r) + SB * SB.transpose();
    const auto llt = spd_cholesky(N, "I + (SB)(SB)^T");
    M.block(l, l, r, r) = -Mat::Identity(r, r);
    M.block(l + r, l + r, r, r) = symmetrized(llt.solve(Mat::Identity(r, r)));
  }
  ResidualReport rep;
  rep.gram_dim = l + 2 * r;
  rep.absolute_frobenius = detail::gram_norm(K, M);
  rep.nres = rep.absolute_frobenius / denom;
  return rep;
}

// Smallest eigenvalue of S2^T S2 - S1^T S1, computed in the joint row space.
inline double min_eig_difference(const LowRankFactor& f1, const LowRankFactor& f2) {
  const Index n = std::max(f1.S.cols(), f2.S.cols());
  require_dims((f1.S.rows() == 0 || f1.S.cols() == n) && (f2.S.rows() == 0 || f2.S.cols() == n),
               "min_eig_difference: factors must share n");
  const Index r = f1.S.rows() + f2.S.rows();
  if (r == 0) return 0.0;
  Mat J(r, n);
  J << f1.S, f2.S;
  Eigen::HouseholderQR<Mat> qr(J.transpose());
  const Index k = std::min(r, n);
  const Mat Q = qr.householderQ() * Mat::Identity(n, k);
  const Mat a = f1.S * Q, b = f2.S * Q;
  Eigen::SelfAdjointEigenSolver<Mat> es(symmetrized(b.transpose() * b - a.transpose() * a),
                                        Eigen::EigenvaluesOnly);
  double lo = es.eigenvalues()(0);
  if (k < n) lo = std::min(lo, 0.0);
  return lo;
}

}  // namespace fta
