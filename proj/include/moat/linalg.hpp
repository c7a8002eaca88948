#pragma once

#include <cmath>
#include <limits>
#include <span>

#include <Eigen/Dense>

namespace moat {

using Matrix = Eigen::MatrixXd;

struct SignedLogDet {
  int sign = 0;  // -1, 0 or +1
  double log_abs = -std::numeric_limits<double>::infinity();

  double value() const { return sign == 0 ? 0.0 : sign * std::exp(log_abs); }
};

// Sum of log|pivot| of a partial-pivot LU factorization, with the sign of
// the permutation and of each pivot tracked separately.
SignedLogDet signed_log_det(const Matrix& m);

// Principal minor of the weighted Laplacian sum_e c_e A_e over K_n with the
// last row and column removed; `coeff` is indexed by pair.
Matrix laplacian_minor(int n, std::span<const double> coeff);

// Log-determinant and inverse of a Laplacian minor in one factorization.
struct MinorFactorization {
  SignedLogDet det;
  Matrix inverse;  // empty when the minor is singular
};
MinorFactorization factor_minor(const Matrix& minor);

// trace(M^{-1} A_e) for every pair e of K_n, where M is the minor with the
// last vertex removed: inv_uu + inv_vv - 2 inv_uv, entries of the removed
// vertex read as zero.
void edge_traces(int n, const Matrix& inverse, std::span<double> out);

}  // namespace moat
