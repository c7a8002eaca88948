#include "moat/linalg.hpp"

#include <cmath>

#include "moat/domain.hpp"

namespace moat {

namespace {

SignedLogDet det_from_lu(const Eigen::PartialPivLU<Matrix>& lu) {
  SignedLogDet out;
  const Matrix& packed = lu.matrixLU();
  int sign = static_cast<int>(lu.permutationP().determinant());
  double log_abs = 0.0;
  for (Eigen::Index i = 0; i < packed.rows(); ++i) {
    const double pivot = packed(i, i);
    if (pivot == 0.0 || !std::isfinite(pivot)) return out;
    if (pivot < 0.0) sign = -sign;
    log_abs += std::log(std::abs(pivot));
  }
  out.sign = sign;
  out.log_abs = log_abs;
  return out;
}

}  // namespace

SignedLogDet signed_log_det(const Matrix& m) {
  if (m.rows() == 0) return {1, 0.0};
  return det_from_lu(Eigen::PartialPivLU<Matrix>(m));
}

Matrix laplacian_minor(int n, std::span<const double> coeff) {
  const int m = n - 1;
  Matrix minor = Matrix::Zero(m, m);
  std::size_t e = 0;
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v, ++e) {
      const double c = coeff[e];
      if (c == 0.0) continue;
      if (u < m) minor(u, u) += c;
      if (v < m) {
        minor(v, v) += c;
        minor(u, v) -= c;
        minor(v, u) -= c;
      }
    }
  }
  return minor;
}

MinorFactorization factor_minor(const Matrix& minor) {
  MinorFactorization out;
  if (minor.rows() == 0) {
    out.det = {1, 0.0};
    return out;
  }
  const Eigen::PartialPivLU<Matrix> lu(minor);
  out.det = det_from_lu(lu);
  if (out.det.sign != 0) out.inverse = lu.inverse();
  return out;
}

void edge_traces(int n, const Matrix& inverse, std::span<double> out) {
  const int m = n - 1;
  std::size_t e = 0;
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v, ++e) {
      if (v < m) {
        out[e] = inverse(u, u) + inverse(v, v) - 2.0 * inverse(u, v);
      } else {
        out[e] = inverse(u, u);
      }
    }
  }
}

}  // namespace moat
