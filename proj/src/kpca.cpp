#include "mlmkl/kpca.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

#include "mlmkl/error.hpp"
#include "fixed_order.hpp"

namespace mlmkl {

CenteredGram center_gram(const Matrix& gram) {
  if (gram.rows() != gram.cols()) throw Error(ErrorCode::ShapeError, "Gram matrix must be square");
  const auto n = static_cast<double>(gram.rows());
  CenteredGram out;
  out.row_means = gram.rowwise().sum() / n;
  out.total_mean = out.row_means.sum() / n;
  // K is symmetric, so column means equal row means.
  out.values = gram;
  out.values.colwise() -= out.row_means;
  out.values.rowwise() -= out.row_means.transpose();
  out.values.array() += out.total_mean;
  return out;
}

KpcaModel fit_kpca(const GramMatrix& gram, Index components) {
  return fit_kpca(gram.values(), components);
}

KpcaModel fit_kpca(const Matrix& gram, Index components) {
  if (components < 1) throw Error(ErrorCode::InvalidArgument, "at least one component required");
  CenteredGram centered = center_gram(gram);
  const Index n = gram.rows();

  Eigen::SelfAdjointEigenSolver<Matrix> solver(centered.values);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::NumericalFailure, "eigendecomposition failed");
  }
  // Eigen returns ascending order.
  const Vector& evals = solver.eigenvalues();
  const double lambda_max = evals(n - 1);
  Index kept = 0;
  if (lambda_max > 0.0) {
    for (Index k = n - 1; k >= 0 && kept < components; --k) {
      if (evals(k) > 1e-10 * lambda_max) ++kept;
      else break;
    }
  }
  if (kept == 0) throw Error(ErrorCode::DegenerateGram, "centered Gram has no positive spectrum");
  if (kept < components) {
    warn("kernel PCA: requested " + std::to_string(components) + " components, rank allows " +
         std::to_string(kept));
  }

  KpcaModel model;
  model.n_fit = n;
  model.row_means = std::move(centered.row_means);
  model.total_mean = centered.total_mean;
  model.eigenvalues.resize(kept);
  model.alphas.resize(n, kept);
  for (Index c = 0; c < kept; ++c) {
    const Index k = n - 1 - c;
    Vector v = solver.eigenvectors().col(k);
    Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    model.eigenvalues(c) = evals(k);
    model.alphas.col(c) = v / std::sqrt(evals(k));
  }
  return model;
}

Matrix transform(const KpcaModel& model, const Matrix& cross) {
  if (cross.cols() != model.n_fit) {
    throw Error(ErrorCode::ShapeError, "expected " + std::to_string(model.n_fit) +
                                           " kernel columns, got " + std::to_string(cross.cols()));
  }
  if (cross.rows() == 0) return Matrix(0, model.components());
  Matrix centered = cross;
  // Column sweep: each row sums in the same order whatever the batch size.
  Vector own_means = Vector::Zero(cross.rows());
  for (Index j = 0; j < cross.cols(); ++j) own_means += cross.col(j);
  own_means /= static_cast<double>(cross.cols());
  centered.colwise() -= own_means;
  centered.rowwise() -= model.row_means.transpose();
  centered.array() += model.total_mean;
  return detail::row_stable_product(centered, model.alphas);
}

}  // namespace mlmkl
