#pragma once

// Dense reference computations for small problems. These use only direct
// factorizations and share no code path with the structured solvers.

#include "fta/common.hpp"
#include "fta/residual.hpp"

#include <cmath>
#include <random>

namespace fta {

inline constexpr Index kOracleMaxDim = 256;

inline void oracle_guard(Index n) { require_dims(n <= kOracleMaxDim, "dense oracle: n > 256"); }

// X <- H + A^T X (I + G X)^{-1} A, t times.
inline Mat dre_dense_general(const Mat& A, const Mat& G, const Mat& H, const Mat& X0, int t) {
  oracle_guard(A.rows());
  const Index n = A.rows();
  Mat X = X0;
  for (int k = 0; k < t; ++k) {
    Eigen::FullPivLU<Mat> lu(Mat::Identity(n, n) + G * X);
    if (!lu.isInvertible()) throw SingularIterate("I + G X is singular");
    X = symmetrized(H + A.transpose() * X * lu.solve(A));
  }
  return X;
}

inline Mat dre_dense(const Mat& A, const Mat& B, const Mat& C, const Mat& X0, int t) {
  return dre_dense_general(A, B * B.transpose(), C.transpose() * C, X0, t);
}

struct SdaState {
  Mat Ak, Gk, Hk;
};

inline SdaState sda_dense(SdaState s, int k) {
  oracle_guard(s.Ak.rows());
  const Index n = s.Ak.rows();
  for (int i = 0; i < k; ++i) {
    Eigen::FullPivLU<Mat> lu(Mat::Identity(n, n) + s.Gk * s.Hk);
    if (!lu.isInvertible()) throw SingularIterate("I + G_k H_k is singular");
    const Mat IA = lu.solve(s.Ak);       // (I + G H)^{-1} A
    const Mat IG = lu.solve(s.Gk);       // (I + G H)^{-1} G
    const Mat An = s.Ak * IA;
    const Mat Gn = s.Gk + s.Ak * IG * s.Ak.transpose();
    const Mat Hn = s.Hk + s.Ak.transpose() * s.Hk * IA;
    s.Ak = An;
    s.Gk = symmetrized(Gn);
    s.Hk = symmetrized(Hn);
  }
  return s;
}

inline SdaState sda_dare_init(const Mat& A, const Mat& B, const Mat& C) {
  return {A, B * B.transpose(), C.transpose() * C};
}

// A0 = I + 2g K^{-T}, G0 = 2g Ah^{-1} B B^T K^{-1}, H0 = 2g K^{-1} C^T C Ah^{-1},
// with Ah = A - g I and K = Ah^T + C^T C Ah^{-1} B B^T.
inline SdaState sda_care_init(const Mat& A, const Mat& B, const Mat& C, double gamma) {
  oracle_guard(A.rows());
  const Index n = A.rows();
  const Mat I = Mat::Identity(n, n);
  Eigen::FullPivLU<Mat> ah(A - gamma * I);
  if (!ah.isInvertible()) throw SingularShift("A - gamma I is singular");
  const Mat Ahi = ah.inverse();
  const Mat K = (A - gamma * I).transpose() + C.transpose() * C * Ahi * B * B.transpose();
  Eigen::FullPivLU<Mat> kl(K);
  if (!kl.isInvertible()) throw SingularShift("K_gamma is singular");
  const Mat Ki = kl.inverse();
  SdaState s;
  s.Ak = I + 2.0 * gamma * Ki.transpose();
  s.Gk = symmetrized(2.0 * gamma * Ahi * B * B.transpose() * Ki);
  s.Hk = symmetrized(2.0 * gamma * Ki * C.transpose() * C * Ahi);
  return s;
}

inline Mat care_residual_dense(const Mat& A, const Mat& B, const Mat& C, const Mat& X) {
  return A.transpose() * X + X * A - X * B * B.transpose() * X + C.transpose() * C;
}

inline Mat dare_residual_dense(const Mat& A, const Mat& B, const Mat& C, const Mat& X) {
  const Index n = A.rows();
  const Mat inner = (Mat::Identity(n, n) + B * B.transpose() * X).fullPivLu().solve(A);
  return -X + A.transpose() * X * inner + C.transpose() * C;
}

// Stabilizing CARE solution from SDA iterated until ||H_{k+1} - H_k||_F <= tol ||H_k||_F.
inline Mat care_solution_dense(const Mat& A, const Mat& B, const Mat& C, double gamma,
                               double tol = 1e-15, int max_steps = 80) {
  SdaState s = sda_care_init(A, B, C, gamma);
  for (int k = 0; k < max_steps; ++k) {
    const Mat prev = s.Hk;
    s = sda_dense(s, 1);
    if ((s.Hk - prev).norm() <= tol * std::max(1.0, s.Hk.norm())) break;
  }
  return s.Hk;
}

inline Mat dare_solution_dense(const Mat& A, const Mat& B, const Mat& C, double tol = 1e-15,
                               int max_steps = 80) {
  SdaState s = sda_dare_init(A, B, C);
  for (int k = 0; k < max_steps; ++k) {
    const Mat prev = s.Hk;
    s = sda_dense(s, 1);
    if ((s.Hk - prev).norm() <= tol * std::max(1.0, s.Hk.norm())) break;
  }
  return s.Hk;
}

inline SpMat to_sparse(const Mat& D) {
  SpMat S = D.sparseView();
  S.makeCompressed();
  return S;
}

inline Mat random_gaussian(Index rows, Index cols, std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Mat M(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) M(i, j) = nd(rng);
  return M;
}

inline Mat random_orthogonal(Index n, std::mt19937_64& rng) {
  Eigen::HouseholderQR<Mat> qr(random_gaussian(n, n, rng));
  return qr.householderQ() * Mat::Identity(n, n);
}

// A = Q diag(d) Q^T + N with d uniform in [lo, hi] and a small nonnormal N.
inline Mat random_spectrum_matrix(Index n, double lo, double hi, double nonnormal, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> ud(lo, hi);
  Vec d(n);
  for (Index i = 0; i < n; ++i) d(i) = ud(rng);
  const Mat Q = random_orthogonal(n, rng);
  const Mat N = random_gaussian(n, n, rng) * (nonnormal / std::sqrt(static_cast<double>(n)));
  return Q * d.asDiagonal() * Q.transpose() + N;
}

// Small discrete-time instance: eigenvalues of A inside the unit disk (up to the
// nonnormal part).
inline RiccatiProblem random_dare_instance(Index n, Index m, Index l, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  RiccatiProblem P;
  P.A = to_sparse(random_spectrum_matrix(n, -0.9, 0.9, 0.05, rng));
  P.B = random_gaussian(n, m, rng) / std::sqrt(static_cast<double>(n));
  P.C = random_gaussian(l, n, rng) / std::sqrt(static_cast<double>(n));
  return P;
}

// Small continuous-time instance: A = Q(-D)Q^T + N, spectrum in the left half plane.
inline RiccatiProblem random_care_instance(Index n, Index m, Index l, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  RiccatiProblem P;
  P.A = to_sparse(random_spectrum_matrix(n, -2.0, -0.2, 0.1, rng));
  P.B = random_gaussian(n, m, rng) / std::sqrt(static_cast<double>(n));
  P.C = random_gaussian(l, n, rng) / std::sqrt(static_cast<double>(n));
  return P;
}

}  // namespace fta
