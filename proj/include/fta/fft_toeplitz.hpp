#pragma once

#include "fta/common.hpp"

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>
#include <vector>

namespace fta {

using cplx = std::complex<double>;

inline Index next_pow2(Index n) {
  Index p = 1;
  while (p < n) p <<= 1;
  return p;
}

namespace detail {

// Real-to-complex / complex-to-real plans of one length, shared process-wide.
// Planning goes through a mutex (the FFTW planner is not reentrant); execution
// uses the new-array interface and is safe from any thread.
struct R2CPlans {
  fftw_plan fwd = nullptr;
  fftw_plan inv = nullptr;
};

class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  R2CPlans get(Index n) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;
    std::vector<double> re(n);
    std::vector<cplx> im(n / 2 + 1);
    auto* c = reinterpret_cast<fftw_complex*>(im.data());
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    R2CPlans p;
    p.fwd = fftw_plan_dft_r2c_1d(static_cast<int>(n), re.data(), c, flags);
    p.inv = fftw_plan_dft_c2r_1d(static_cast<int>(n), c, re.data(), flags);
    plans_.emplace(n, p);
    return p;
  }

  ~PlanCache() {
    for (auto& [n, p] : plans_) {
      fftw_destroy_plan(p.fwd);
      fftw_destroy_plan(p.inv);
    }
  }

 private:
  PlanCache() = default;
  std::mutex mu_;
  std::map<Index, R2CPlans> plans_;
};

}  // namespace detail

// FFT length and the plans used for one block order.
struct ConvolutionPlan {
  Index fft_length = 0;
  detail::R2CPlans plans;

  ConvolutionPlan() = default;
  explicit ConvolutionPlan(Index n) : fft_length(n), plans(detail::PlanCache::instance().get(n)) {}

  Index freqs() const { return fft_length / 2 + 1; }

  // in: fft_length reals (zero padded by the caller), out: freqs() values.
  void forward(double* in, cplx* out) const {
    fftw_execute_dft_r2c(plans.fwd, in, reinterpret_cast<fftw_complex*>(out));
  }
  // Unnormalized inverse; clobbers `in`.
  void inverse(cplx* in, double* out) const {
    fftw_execute_dft_c2r(plans.inv, reinterpret_cast<fftw_complex*>(in), out);
  }
};

// Full linear convolution of two real sequences via zero-padded FFT.
inline std::vector<double> circular_convolve(const std::vector<double>& a,
                                             const std::vector<double>& b) {
  if (a.empty() || b.empty()) throw DimensionMismatch("circular_convolve: empty input");
  const Index len = static_cast<Index>(a.size() + b.size() - 1);
  ConvolutionPlan plan(next_pow2(len));
  const Index n = plan.fft_length;
  std::vector<double> ra(n, 0.0), rb(n, 0.0);
  std::copy(a.begin(), a.end(), ra.begin());
  std::copy(b.begin(), b.end(), rb.begin());
  std::vector<cplx> fa(plan.freqs()), fb(plan.freqs());
  plan.forward(ra.data(), fa.data());
  plan.forward(rb.data(), fb.data());
  for (Index k = 0; k < plan.freqs(); ++k) fa[k] *= fb[k];
  plan.inverse(fa.data(), ra.data());
  std::vector<double> out(len);
  for (Index k = 0; k < len; ++k) out[k] = ra[k] / static_cast<double>(n);
  return out;
}

enum class Orientation { LowerFromColumn, UpperFromColumn };

// Block-Toeplitz matrix given by its defining blocks A_0..A_{t-1}, stacked
// vertically in `blocks` (p1*t x p2).
//   lower: block (i,j) = A_{i-j} for i >= j
//   upper: block (i,j) = A_{t-1-(j-i)} for j >= i
struct BlockToeplitzSpec {
  Mat blocks;
  Index p1 = 0;
  Index p2 = 0;
  Index t = 0;
  Orientation orientation = Orientation::LowerFromColumn;

  BlockToeplitzSpec() = default;
  BlockToeplitzSpec(Mat col, Index p1_, Index t_, Orientation o = Orientation::LowerFromColumn)
      : blocks(std::move(col)), p1(p1_), p2(blocks.cols()), t(t_), orientation(o) {
    if (t < 1 || p1 < 1 || blocks.rows() != p1 * t) {
      throw DimensionMismatch("BlockToeplitzSpec: defining column must be p1*t rows, t >= 1");
    }
  }

  static BlockToeplitzSpec lower(Mat col, Index p1, Index t) {
    return {std::move(col), p1, t, Orientation::LowerFromColumn};
  }
  static BlockToeplitzSpec upper(Mat col, Index p1, Index t) {
    return {std::move(col), p1, t, Orientation::UpperFromColumn};
  }

  auto block(Index k) const { return blocks.middleRows(k * p1, p1); }
  Index rows() const { return p1 * t; }
  Index cols() const { return p2 * t; }
};

// Reverse the order of the row blocks of height p.
inline Mat reverse_blocks(const Mat& X, Index p) {
  const Index k = X.rows() / p;
  Mat out(X.rows(), X.cols());
  for (Index i = 0; i < k; ++i) out.middleRows(i * p, p) = X.middleRows((k - 1 - i) * p, p);
  return out;
}

// Transpose each p1 x p2 block of a stacked column.
inline Mat transpose_blocks(const Mat& col, Index p1) {
  const Index p2 = col.cols();
  const Index k = col.rows() / p1;
  Mat out(p2 * k, p1);
  for (Index i = 0; i < k; ++i) out.middleRows(i * p2, p2) = col.middleRows(i * p1, p1).transpose();
  return out;
}

// Lower block convolution with precomputed spectrum:
//   apply:            Y_i = sum_{k<=i} B_k   X_{i-k}
//   apply_transposed: Y_i = sum_{k<=i} B_k^T X_{i-k}
class LowerBlockConvolution {
 public:
  static constexpr Index kDenseMaxOrder = 4;

  LowerBlockConvolution() = default;

  LowerBlockConvolution(const Mat& col, Index p1, Index t) : col_(col), p1_(p1), p2_(col.cols()), t_(t) {
    require_dims(col.rows() == p1 * t, "LowerBlockConvolution: column height");
    if (t_ > kDenseMaxOrder) {
      plan_ = ConvolutionPlan(next_pow2(2 * t_ - 1));
      const Index n = plan_.fft_length;
      const Index f = plan_.freqs();
      spectrum_.assign(static_cast<std::size_t>(p1_ * p2_), std::vector<cplx>(f));
      std::vector<double> buf(n);
      for (Index a = 0; a < p1_; ++a) {
        for (Index b = 0; b < p2_; ++b) {
          std::fill(buf.begin(), buf.end(), 0.0);
          for (Index k = 0; k < t_; ++k) buf[k] = col_(k * p1_ + a, b);
          plan_.forward(buf.data(), spectrum_[a * p2_ + b].data());
        }
      }
    }
  }

  Index p1() const { return p1_; }
  Index p2() const { return p2_; }
  Index order() const { return t_; }

  Mat apply(const Mat& X) const { return run(X, false); }
  Mat apply_transposed(const Mat& X) const { return run(X, true); }

 private:
  Mat run(const Mat& X, bool tr) const {
    const Index pin = tr ? p1_ : p2_;
    const Index pout = tr ? p2_ : p1_;
    require_dims(X.rows() == pin * t_, "block Toeplitz apply: row count");
    const Index q = X.cols();
    Mat Y = Mat::Zero(pout * t_, q);
    if (q == 0) return Y;
    if (t_ <= kDenseMaxOrder) {
      for (Index i = 0; i < t_; ++i) {
        for (Index k = 0; k <= i; ++k) {
          auto Bk = col_.middleRows(k * p1_, p1_);
          if (tr) {
            Y.middleRows(i * pout, pout).noalias() += Bk.transpose() * X.middleRows((i - k) * pin, pin);
          } else {
            Y.middleRows(i * pout, pout).noalias() += Bk * X.middleRows((i - k) * pin, pin);
          }
        }
      }
      return Y;
    }
    const Index n = plan_.fft_length;
    const Index f = plan_.freqs();
    const double scale = 1.0 / static_cast<double>(n);
    std::vector<double> buf(n);
    std::vector<cplx> xh(static_cast<std::size_t>(pin * f));
    std::vector<cplx> acc(f);
    for (Index c = 0; c < q; ++c) {
      for (Index b = 0; b < pin; ++b) {
        std::fill(buf.begin(), buf.end(), 0.0);
        for (Index k = 0; k < t_; ++k) buf[k] = X(k * pin + b, c);
        plan_.forward(buf.data(), xh.data() + b * f);
      }
      for (Index a = 0; a < pout; ++a) {
        std::fill(acc.begin(), acc.end(), cplx(0.0, 0.0));
        for (Index b = 0; b < pin; ++b) {
          const auto& s = tr ? spectrum_[b * p2_ + a] : spectrum_[a * p2_ + b];
          const cplx* x = xh.data() + b * f;
          for (Index k = 0; k < f; ++k) acc[k] += s[k] * x[k];
        }
        plan_.inverse(acc.data(), buf.data());
        for (Index k = 0; k < t_; ++k) Y(k * pout + a, c) = buf[k] * scale;
      }
    }
    return Y;
  }

  Mat col_;
  Index p1_ = 0, p2_ = 0, t_ = 0;
  ConvolutionPlan plan_;
  std::vector<std::vector<cplx>> spectrum_;
};

// A block-Toeplitz matrix with its spectrum cached, for repeated products.
class BlockToeplitzOperator {
 public:
  BlockToeplitzOperator() = default;

  explicit BlockToeplitzOperator(const BlockToeplitzSpec& spec) : spec_(spec) {
    // toepU(A) = J toepL(rev A) J, with J reversing block order.
    const bool up = spec.orientation == Orientation::UpperFromColumn;
    conv_ = LowerBlockConvolution(up ? reverse_blocks(spec.blocks, spec.p1) : spec.blocks, spec.p1, spec.t);
  }

  const BlockToeplitzSpec& spec() const { return spec_; }
  Index rows() const { return spec_.rows(); }
  Index cols() const { return spec_.cols(); }

  Mat apply(const Mat& X) const {
    require_dims(X.rows() == cols(), "bt_apply: X must have p2*t rows");
    if (spec_.orientation == Orientation::LowerFromColumn) return conv_.apply(X);
    return reverse_blocks(conv_.apply(reverse_blocks(X, spec_.p2)), spec_.p1);
  }

  Mat apply_transpose(const Mat& X) const {
    require_dims(X.rows() == rows(), "bt_apply_transpose: X must have p1*t rows");
    if (spec_.orientation == Orientation::LowerFromColumn) {
      return reverse_blocks(conv_.apply_transposed(reverse_blocks(X, spec_.p1)), spec_.p2);
    }
    return conv_.apply_transposed(X);
  }

 private:
  BlockToeplitzSpec spec_;
  LowerBlockConvolution conv_;
};

inline Mat bt_apply(const BlockToeplitzSpec& T, const Mat& X) {
  return BlockToeplitzOperator(T).apply(X);
}

inline Mat bt_apply_transpose(const BlockToeplitzSpec& T, const Mat& X) {
  return BlockToeplitzOperator(T).apply_transpose(X);
}

// Product of two lower block-Toeplitz matrices, as a truncated block convolution.
inline BlockToeplitzSpec bt_compose_lower(const BlockToeplitzSpec& A, const BlockToeplitzSpec& B) {
  if (A.orientation != Orientation::LowerFromColumn || B.orientation != Orientation::LowerFromColumn) {
    throw DimensionMismatch("bt_compose_lower: both operands must be lower");
  }
  require_dims(A.p2 == B.p1 && A.t == B.t, "bt_compose_lower: inner block size / order");
  // First block column of A*B is toepL(A) applied to B's defining column.
  return BlockToeplitzSpec::lower(LowerBlockConvolution(A.blocks, A.p1, A.t).apply(B.blocks), A.p1, A.t);
}

// Dense materialization; for tests and debugging only.
inline Mat densify(const BlockToeplitzSpec& T) {
  Mat D = Mat::Zero(T.rows(), T.cols());
  for (Index i = 0; i < T.t; ++i) {
    for (Index j = 0; j < T.t; ++j) {
      if (T.orientation == Orientation::LowerFromColumn && i >= j) {
        D.block(i * T.p1, j * T.p2, T.p1, T.p2) = T.block(i - j);
      } else if (T.orientation == Orientation::UpperFromColumn && j >= i) {
        D.block(i * T.p1, j * T.p2, T.p1, T.p2) = T.block(T.t - 1 - (j - i));
      }
    }
  }
  return D;
}

}  // namespace fta
