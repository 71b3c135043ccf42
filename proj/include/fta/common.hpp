#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace fta {

using Index = Eigen::Index;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define FTA_DEFINE_ERROR(Name)          \
  class Name : public Error {           \
   public:                              \
    using Error::Error;                 \
  };

FTA_DEFINE_ERROR(DimensionMismatch)
FTA_DEFINE_ERROR(StackBlowup)
FTA_DEFINE_ERROR(PcgFailure)
FTA_DEFINE_ERROR(BreakdownNonSpd)
FTA_DEFINE_ERROR(NotPositiveDefinite)
FTA_DEFINE_ERROR(SingularShift)
FTA_DEFINE_ERROR(SingularClosedLoop)
FTA_DEFINE_ERROR(SingularIterate)
FTA_DEFINE_ERROR(SingularPreconditioner)
FTA_DEFINE_ERROR(ZeroRhs)
FTA_DEFINE_ERROR(NumericalInconsistency)
FTA_DEFINE_ERROR(ParseError)
FTA_DEFINE_ERROR(IoError)

#undef FTA_DEFINE_ERROR

inline void require_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionMismatch(what);
}

// Tall-thin factor S with X = S^T S.
struct LowRankFactor {
  Mat S;

  LowRankFactor() = default;
  explicit LowRankFactor(Mat s) : S(std::move(s)) {}

  Index rank() const { return S.rows(); }
  Index dim() const { return S.cols(); }
  Mat dense() const { return S.transpose() * S; }
};

// One row of a convergence history.
struct RoundRecord {
  int round = 0;
  int t = 0;
  double gamma = 0.0;
  double nres = 0.0;
  Index rank = 0;
  double ms = 0.0;
};

using History = std::vector<RoundRecord>;

// Raised when an outer loop exhausts its budget; carries the best iterate.
class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& msg, LowRankFactor best, History history)
      : Error(msg), best_(std::move(best)), history_(std::move(history)) {}

  const LowRankFactor& best() const { return best_; }
  const History& history() const { return history_; }

 private:
  LowRankFactor best_;
  History history_;
};

inline Mat symmetrized(const Mat& M) { return 0.5 * (M + M.transpose()); }

// Cholesky of a symmetrized SPD matrix; throws NotPositiveDefinite on failure.
inline Eigen::LLT<Mat> spd_cholesky(const Mat& M, const char* what) {
  Eigen::LLT<Mat> llt(symmetrized(M));
  if (llt.info() != Eigen::Success) {
    throw NotPositiveDefinite(std::string(what) + " is not positive definite");
  }
  return llt;
}

}  // namespace fta
