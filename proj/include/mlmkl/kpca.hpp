#pragma once

#include "mlmkl/kernels.hpp"

namespace mlmkl {

struct CenteredGram {
  Matrix values;
  Vector row_means;
  double total_mean = 0.0;
};

/// Double centering K - 1K - K1 + 1K1 (1 = n x n matrix of 1/n).
CenteredGram center_gram(const Matrix& gram);

/// Fitted kernel PCA: projection directions scaled by 1/sqrt(lambda) plus the
/// statistics needed to center kernel rows of unseen points.
struct KpcaModel {
  Matrix alphas;       // n_fit x p
  Vector eigenvalues;  // descending, strictly positive
  Vector row_means;    // training Gram row means
  double total_mean = 0.0;
  Index n_fit = 0;

  Index components() const noexcept { return alphas.cols(); }
};

/// Keeps the top min(p, rank) eigenpairs of the centered Gram with
/// lambda > 1e-10 * lambda_max. Each eigenvector's largest-magnitude entry is
/// made positive.
KpcaModel fit_kpca(const GramMatrix& gram, Index components);
KpcaModel fit_kpca(const Matrix& gram, Index components);

/// Projects kernel rows k(test_i, train_j) (t x n_fit) onto the components.
Matrix transform(const KpcaModel& model, const Matrix& cross);

}  // namespace mlmkl
