// Solves the scalar CARE  -2x - x^2 + 1 = 0  (A = -1, B = C = 1) and a small
// random CARE, printing the residual history.

#include "fta/fta.hpp"

#include <cmath>
#include <cstdio>

int main() {
  fta::CareProblem P;
  P.A = fta::to_sparse(fta::Mat::Constant(1, 1, -1.0));
  P.B = fta::Mat::Ones(1, 1);
  P.C = fta::Mat::Ones(1, 1);

  fta::CareSolveOptions opt;
  opt.gamma0 = 1.0;
  opt.t = 8;
  const auto res = fta::fta_care_solve(P, opt);
  const double x = res.factor.dense()(0, 0);
  std::printf("scalar: X = %.15f (exact %.15f), rounds %zu\n", x, std::sqrt(2.0) - 1.0, res.history.size());

  const auto Q = fta::random_care_instance(40, 2, 2, 7);
  opt.gamma0 = 1.0;
  opt.t = 16;
  for (const auto& r : fta::fta_care_solve(Q, opt).history) {
    std::printf("round %d  nres %.3e  rank %ld\n", r.round, r.nres, static_cast<long>(r.rank));
  }
  return 0;
}
