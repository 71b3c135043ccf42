#pragma once

#include "fta/common.hpp"
#include "fta/fft_toeplitz.hpp"

#include <cmath>
#include <functional>
#include <memory>

namespace fta {

// Symmetric positive definite operator given only by its action.
struct SpdOperator {
  std::function<Vec(const Vec&)> apply;
  Index dim = 0;
};

// I + L L^T for a lower block-Toeplitz L, realized with two FFT products.
inline SpdOperator make_gram_operator(std::shared_ptr<const BlockToeplitzOperator> L) {
  const Index d = L->rows();
  return {[L](const Vec& v) -> Vec {
            Mat w = L->apply_transpose(v);
            return v + L->apply(w).col(0);
          },
          d};
}

enum class PreconditionerKind { Auto, Identity, BlockCirculant };

struct PcgConfig {
  double rel_tol = 1e-12;
  int max_iter = 0;  // 0: 10*sqrt(dim) + 100
  PreconditionerKind preconditioner = PreconditionerKind::Auto;
  int residual_refresh = 25;
  // Systems up to this size that PCG cannot resolve are solved by dense Cholesky instead.
  Index dense_fallback_dim = 4096;

  int iteration_cap(Index dim) const {
    if (max_iter > 0) return max_iter;
    return static_cast<int>(10.0 * std::sqrt(static_cast<double>(dim))) + 100;
  }
};

struct Preconditioner {
  std::function<Vec(const Vec&)> apply;  // empty: identity

  bool is_identity() const { return !apply; }
  Vec operator()(const Vec& r) const { return apply ? apply(r) : r; }
};

struct PcgResult {
  Mat X;
  std::vector<int> iterations;
  std::vector<double> residuals;  // ||op(x) - b||_2, recomputed
  bool converged = true;
};

inline PcgResult pcg_solve(const SpdOperator& op, const Preconditioner& M, const Mat& rhs,
                           const PcgConfig& cfg = {}) {
  require_dims(rhs.rows() == op.dim, "pcg_solve: rhs rows must equal operator dimension");
  const Index q = rhs.cols();
  const int cap = cfg.iteration_cap(op.dim);
  const int refresh = std::max(1, cfg.residual_refresh);
  PcgResult out;
  out.X = Mat::Zero(op.dim, q);
  out.iterations.assign(q, 0);
  out.residuals.assign(q, 0.0);

  for (Index c = 0; c < q; ++c) {
    const Vec b = rhs.col(c);
    const double bnorm = b.norm();
    if (bnorm == 0.0) continue;
    const double tol = cfg.rel_tol * bnorm;

    Vec x = Vec::Zero(op.dim);
    Vec r = b;
    Vec z = M(r);
    Vec p = z;
    double rz = r.dot(z);
    int it = 0;
    bool done = false;
    while (it < cap) {
      const Vec Ap = op.apply(p);
      const double pAp = p.dot(Ap);
      if (!(pAp > 0.0)) {
        throw BreakdownNonSpd("pcg_solve: p^T A p <= 0, operator is not positive definite");
      }
      const double alpha = rz / pAp;
      x.noalias() += alpha * p;
      ++it;
      if (it % refresh == 0) {
        r = b - op.apply(x);
      } else {
        r.noalias() -= alpha * Ap;
      }
      if (r.norm() <= tol) {
        r = b - op.apply(x);
        if (r.norm() <= tol) {
          done = true;
          break;
        }
      }
      z = M(r);
      const double rz_new = r.dot(z);
      p = z + (rz_new / rz) * p;
      rz = rz_new;
    }
    out.X.col(c) = x;
    out.iterations[c] = it;
    out.residuals[c] = (b - op.apply(x)).norm();
    if (!done) out.converged = false;
  }
  return out;
}

// Strang-type block-circulant completion C of a lower block-Toeplitz L of order
// k (c_j = L_j for j <= k/2, zero otherwise); returns v -> (I + C C^T)^{-1} v,
// diagonalized by the DFT.
inline Preconditioner build_block_circulant_preconditioner(const BlockToeplitzSpec& L) {
  if (L.orientation != Orientation::LowerFromColumn) {
    throw DimensionMismatch("block circulant preconditioner needs a lower spec");
  }
  if (L.blocks.isZero(0.0)) return {};

  const Index k = L.t, p1 = L.p1, p2 = L.p2;
  auto plan = std::make_shared<ConvolutionPlan>(k);
  const Index f = plan->freqs();

  std::vector<Eigen::MatrixXcd> chat(f, Eigen::MatrixXcd::Zero(p1, p2));
  std::vector<double> buf(k);
  std::vector<cplx> spec(f);
  for (Index a = 0; a < p1; ++a) {
    for (Index b = 0; b < p2; ++b) {
      std::fill(buf.begin(), buf.end(), 0.0);
      for (Index j = 0; j <= k / 2; ++j) buf[j] = L.blocks(j * p1 + a, b);
      plan->forward(buf.data(), spec.data());
      for (Index w = 0; w < f; ++w) chat[w](a, b) = spec[w];
    }
  }

  auto inv = std::make_shared<std::vector<Eigen::MatrixXcd>>(f);
  for (Index w = 0; w < f; ++w) {
    Eigen::MatrixXcd Mw = Eigen::MatrixXcd::Identity(p1, p1) + chat[w] * chat[w].adjoint();
    Eigen::LLT<Eigen::MatrixXcd> llt(0.5 * (Mw + Mw.adjoint()));
    if (llt.info() != Eigen::Success) {
      throw SingularPreconditioner("circulant eigenblock is numerically singular");
    }
    (*inv)[w] = llt.solve(Eigen::MatrixXcd::Identity(p1, p1));
  }

  return {[plan, inv, k, p1, f](const Vec& v) -> Vec {
    std::vector<double> re(k);
    std::vector<cplx> vh(static_cast<std::size_t>(p1 * f));
    for (Index a = 0; a < p1; ++a) {
      for (Index j = 0; j < k; ++j) re[j] = v(j * p1 + a);
      plan->forward(re.data(), vh.data() + a * f);
    }
    std::vector<cplx> acc(f);
    Vec out(v.size());
    const double scale = 1.0 / static_cast<double>(k);
    for (Index a = 0; a < p1; ++a) {
      for (Index w = 0; w < f; ++w) {
        cplx s(0.0, 0.0);
        for (Index b = 0; b < p1; ++b) s += (*inv)[w](a, b) * vh[b * f + w];
        acc[w] = s;
      }
      plan->inverse(acc.data(), re.data());
      for (Index j = 0; j < k; ++j) out(j * p1 + a) = re[j] * scale;
    }
    return out;
  }};
}

// Preconditioner for I + L L^T chosen by the configured rule.
inline Preconditioner choose_preconditioner(const BlockToeplitzSpec& L, const PcgConfig& cfg) {
  switch (cfg.preconditioner) {
    case PreconditionerKind::Identity:
      return {};
    case PreconditionerKind::BlockCirculant:
      break;
    case PreconditionerKind::Auto:
      if (L.t < 16) return {};
      break;
  }
  try {
    return build_block_circulant_preconditioner(L);
  } catch (const SingularPreconditioner&) {
    return {};
  }
}

}  // namespace fta
