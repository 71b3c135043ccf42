#pragma once

#include "fta/common.hpp"
#include "fta/fft_toeplitz.hpp"
#include "fta/pcg.hpp"

#include <cmath>
#include <memory>
#include <optional>

namespace fta {

// Dare: the defining column is [0; D] and only the trailing block I + L L^T,
//       L = toepL(D) of order t-1, is inverted (the leading block is I).
// Care: the defining column is [Y; D] and I + T T^T, T = toepL([Y; D]), is inverted.
enum class SweepMode { Dare, Care };

// Small solves behind the structured inverse. In Dare mode Q2c has t-2 blocks
// and Q3 = [Q3t; Q3c]; in Care mode Q2c has t-1 blocks and Q3t is empty.
struct SweepArtifacts {
  SweepMode mode = SweepMode::Care;
  Index t = 0, p1 = 0, p2 = 0;
  Mat Q2c, Q2b, Q3t, Q3c, W, Wtilde;
  Mat LQ, LW;  // lower Cholesky factors of Q2b and Wtilde
  int pcg_iterations = 0;
};

namespace detail {

inline Mat right_inv_transpose(const Mat& X, const Mat& L) {
  // X * L^{-T}
  return L.triangularView<Eigen::Lower>().solve(X.transpose()).transpose();
}

inline Mat pcg_or_throw(const SpdOperator& op, const Preconditioner& M, const Mat& rhs,
                        const PcgConfig& cfg, int& iters) {
  PcgResult r = pcg_solve(op, M, rhs, cfg);
  for (int k : r.iterations) iters += k;
  if (r.converged) return r.X;
  double worst = 0.0;
  for (Index c = 0; c < rhs.cols(); ++c) {
    const double b = rhs.col(c).norm();
    if (b > 0) worst = std::max(worst, r.residuals[c] / b);
  }
  if (op.dim > cfg.dense_fallback_dim) {
    throw PcgFailure("PCG did not reach rel_tol (achieved " + std::to_string(worst) + ")");
  }
  // Ill-conditioned but small: assemble the operator and factor it directly.
  Mat D(op.dim, op.dim);
  for (Index j = 0; j < op.dim; ++j) D.col(j) = op.apply(Vec::Unit(op.dim, j));
  return spd_cholesky(symmetrized(D), "I + T T^T").solve(rhs);
}

}  // namespace detail

inline SweepArtifacts solve_sweep_systems(const BlockToeplitzSpec& col, SweepMode mode,
                                          const PcgConfig& cfg = {}) {
  require_dims(col.orientation == Orientation::LowerFromColumn, "solve_sweep_systems: lower spec");
  const Index t = col.t, p1 = col.p1, p2 = col.p2;
  SweepArtifacts a;
  a.mode = mode;
  a.t = t;
  a.p1 = p1;
  a.p2 = p2;
  const Mat I1 = Mat::Identity(p1, p1);
  const Mat I2 = Mat::Identity(p2, p2);

  if (mode == SweepMode::Dare) {
    if (t == 1) {
      a.Q2c.resize(0, p1);
      a.Q2b = I1;
      a.Q3t.resize(0, p2);
      a.Q3c.resize(0, p2);
      a.W = a.Wtilde = I2;
    } else {
      const Index k = t - 1;
      const Mat D = col.blocks.bottomRows(p1 * k);
      auto spec = BlockToeplitzSpec::lower(D, p1, k);
      auto L = std::make_shared<const BlockToeplitzOperator>(spec);
      const SpdOperator op = make_gram_operator(L);
      const Preconditioner M = choose_preconditioner(spec, cfg);
      Mat rhs = Mat::Zero(p1 * k, p1 + p2);
      rhs.bottomLeftCorner(p1, p1) = I1;
      rhs.rightCols(p2) = D;
      const Mat sol = detail::pcg_or_throw(op, M, rhs, cfg, a.pcg_iterations);
      a.Q2c = sol.topLeftCorner(p1 * (k - 1), p1);
      a.Q2b = sol.bottomLeftCorner(p1, p1);
      a.Q3t = sol.topRightCorner(p1, p2);
      a.Q3c = sol.bottomRightCorner(p1 * (k - 1), p2);
      a.W = I2 - sol.rightCols(p2).transpose() * D;
      a.Wtilde = a.W;
    }
  } else {
    const Mat Y = col.blocks.topRows(p1);
    auto full = std::make_shared<const BlockToeplitzOperator>(col);
    const SpdOperator op = make_gram_operator(full);
    Mat e = Mat::Zero(p1 * t, p1);
    e.bottomRows(p1) = I1;
    const Mat q2 = detail::pcg_or_throw(op, choose_preconditioner(col, cfg), e, cfg, a.pcg_iterations);
    a.Q2c = q2.topRows(p1 * (t - 1));
    a.Q2b = q2.bottomRows(p1);
    a.Q3t.resize(0, p2);
    if (t == 1) {
      a.Q3c.resize(0, p2);
      a.W = I2;
    } else {
      const Index k = t - 1;
      const Mat D = col.blocks.bottomRows(p1 * k);
      // Trailing principal block of I + T T^T.
      const SpdOperator trailing{[full, p1, k](const Vec& v) -> Vec {
                                   Vec x = Vec::Zero(p1 * (k + 1));
                                   x.tail(p1 * k) = v;
                                   const Mat w = full->apply_transpose(x);
                                   const Vec y = x + full->apply(w).col(0);
                                   return y.tail(p1 * k);
                                 },
                                 p1 * k};
      const Preconditioner M =
          choose_preconditioner(BlockToeplitzSpec::lower(col.blocks.topRows(p1 * k), p1, k), cfg);
      a.Q3c = detail::pcg_or_throw(trailing, M, D, cfg, a.pcg_iterations);
      a.W = I2 - a.Q3c.transpose() * D;
    }
    a.Wtilde = a.W + a.W * Y.transpose() * Y * a.W;
  }

  a.LQ = spd_cholesky(a.Q2b, "Q2b").matrixL();
  a.LW = spd_cholesky(a.Wtilde, "Wtilde").matrixL();
  return a;
}

// R^{-1} = toepU(G1) toepU(G1)^T + toepU(G2) toepU(G2)^T with
//   G1 = [Q2c; Q2b] L_Q^{-T},  G2 = [Q3c; 0] L_W^{-T}.
class StructuredInverse {
 public:
  StructuredInverse() = default;

  explicit StructuredInverse(SweepArtifacts art, std::optional<Mat> Y = std::nullopt)
      : art_(std::move(art)), Y_(std::move(Y)) {
    const Index p1 = art_.p1, p2 = art_.p2;
    order_ = art_.mode == SweepMode::Dare ? art_.t - 1 : art_.t;
    if (order_ == 0) return;
    Mat q2(p1 * order_, p1);
    q2 << art_.Q2c, art_.Q2b;
    Mat q3 = Mat::Zero(p1 * order_, p2);
    q3.topRows(art_.Q3c.rows()) = art_.Q3c;
    U1_ = BlockToeplitzOperator(BlockToeplitzSpec::upper(detail::right_inv_transpose(q2, art_.LQ), p1, order_));
    U2_ = BlockToeplitzOperator(BlockToeplitzSpec::upper(detail::right_inv_transpose(q3, art_.LW), p1, order_));
  }

  const SweepArtifacts& artifacts() const { return art_; }
  const std::optional<Mat>& Y() const { return Y_; }
  Index p1() const { return art_.p1; }
  Index p2() const { return art_.p2; }
  // Block order of the inverted matrix (t-1 in Dare mode).
  Index order() const { return order_; }

  // (Xi1, Xi2) = (toepU(G1)^T V, toepU(G2)^T V); V has p1*order() rows.
  std::pair<Mat, Mat> apply(const Mat& V) const {
    require_dims(V.rows() == art_.p1 * order_, "StructuredInverse::apply: row count");
    if (order_ == 0) return {Mat(0, V.cols()), Mat(0, V.cols())};
    return {U1_.apply_transpose(V), U2_.apply_transpose(V)};
  }

  // Dense R^{-1}; testing aid.
  Mat dense() const {
    const Mat I = Mat::Identity(art_.p1 * order_, art_.p1 * order_);
    auto [a, b] = apply(I);
    return a.transpose() * a + b.transpose() * b;
  }

 private:
  SweepArtifacts art_;
  std::optional<Mat> Y_;
  Index order_ = 0;
  BlockToeplitzOperator U1_, U2_;
};

inline StructuredInverse build_structured_inverse(const BlockToeplitzSpec& col, SweepMode mode,
                                                  const PcgConfig& cfg = {}) {
  std::optional<Mat> Y;
  if (mode == SweepMode::Care) Y = col.blocks.topRows(col.p1);
  return StructuredInverse(solve_sweep_systems(col, mode, cfg), std::move(Y));
}

// Xi1^T Xi1 + Xi2^T Xi2 = V^T (I + T T^T)^{-1} V. In Dare mode V may carry the
// full p1*t rows; its leading block meets an identity and is left to the caller.
inline std::pair<Mat, Mat> apply_structured_inverse(const StructuredInverse& inv, const Mat& V) {
  const Index need = inv.p1() * inv.order();
  if (inv.artifacts().mode == SweepMode::Dare && V.rows() == need + inv.p1()) {
    return inv.apply(V.bottomRows(need));
  }
  return inv.apply(V);
}

enum class DisplacementSign { Plus, Minus };

namespace detail {
inline Mat block_shift(Index n, Index p) {
  Mat Z = Mat::Zero(n, n);
  for (Index i = p; i < n; ++i) Z(i, i - p) = 1.0;
  return Z;
}
}  // namespace detail

// Numerical rank (threshold 1e-10 sigma_max) of R - Z R Z^T (Plus) or
// R - Z^T R Z (Minus), reported in blocks of p, rounded up.
inline int displacement_rank(const Mat& R, Index p, DisplacementSign sign) {
  require_dims(R.rows() == R.cols() && p > 0 && R.rows() % p == 0, "displacement_rank: shape");
  const Mat Z = detail::block_shift(R.rows(), p);
  const Mat res = sign == DisplacementSign::Plus ? Mat(R - Z * R * Z.transpose())
                                                 : Mat(R - Z.transpose() * R * Z);
  Eigen::JacobiSVD<Mat> svd(res);
  const Vec s = svd.singularValues();
  if (s.size() == 0 || s(0) == 0.0) return 0;
  Index rank = 0;
  for (Index i = 0; i < s.size(); ++i) rank += s(i) > 1e-10 * s(0);
  return static_cast<int>((rank + p - 1) / p);
}

// Plus: toepL(R1) toepL(R2)^T; Minus: toepU(R1) toepU(R2)^T (p x p blocks).
inline Mat gs_reconstruct(const Mat& R1, const Mat& R2, DisplacementSign sign) {
  require_dims(R1.rows() == R2.rows() && R1.cols() == R2.cols() && R1.cols() > 0 &&
                   R1.rows() % R1.cols() == 0,
               "gs_reconstruct: generators must be pn x p");
  const Index p = R1.cols();
  const Index n = R1.rows() / p;
  const auto o = sign == DisplacementSign::Plus ? Orientation::LowerFromColumn : Orientation::UpperFromColumn;
  return densify(BlockToeplitzSpec(R1, p, n, o)) * densify(BlockToeplitzSpec(R2, p, n, o)).transpose();
}

}  // namespace fta
