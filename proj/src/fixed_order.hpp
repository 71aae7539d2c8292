#pragma once

#include "mlmkl/types.hpp"

namespace mlmkl::detail {

// Fixed summation order so a result does not depend on where the operands
// live in memory or how many rows share the call.
inline double fixed_dot(const double* a, const double* b, Index d) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  Index k = 0;
  for (; k + 4 <= d; k += 4) {
    s0 += a[k] * b[k];
    s1 += a[k + 1] * b[k + 1];
    s2 += a[k + 2] * b[k + 2];
    s3 += a[k + 3] * b[k + 3];
  }
  for (; k < d; ++k) s0 += a[k] * b[k];
  return (s0 + s1) + (s2 + s3);
}

/// a * b where each output row depends only on the matching row of a.
/// Blocked GEMM rounds differently with batch size; this does not.
inline Matrix row_stable_product(const Matrix& a, const Matrix& b) {
  const Matrix at = a.transpose();
  Matrix out(a.rows(), b.cols());
  for (Index j = 0; j < b.cols(); ++j) {
    for (Index i = 0; i < a.rows(); ++i) out(i, j) = fixed_dot(at.col(i).data(), b.col(j).data(), a.cols());
  }
  return out;
}

}  // namespace mlmkl::detail
