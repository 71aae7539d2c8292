#pragma once

#include <vector>

#include "mlmkl/kernels.hpp"

namespace mlmkl {

/// Local basis sets B_i: column i of the mask marks the basis_size nearest
/// neighbours of sample i (self excluded).
class LocalBases {
 public:
  LocalBases(std::vector<std::vector<Index>> members, Index n);

  Index n() const noexcept { return n_; }
  Index basis_size() const noexcept { return basis_size_; }
  /// Sorted indices of B_i.
  const std::vector<Index>& members(Index i) const { return members_[static_cast<std::size_t>(i)]; }
  /// Dense 0/1 mask D with D(j, i) = 1 iff j is in B_i.
  Matrix mask() const;

 private:
  std::vector<std::vector<Index>> members_;
  Index n_ = 0;
  Index basis_size_ = 0;
};

/// Pairwise squared distances M(i, j) = P(i,i) + P(j,j) - 2 P(i,j).
Matrix distortion_matrix(const Matrix& linear_gram);

/// Nearest neighbours by squared distance derived from the linear Gram P,
/// ties resolved toward the smaller index.
LocalBases build_local_bases(const Matrix& linear_gram, Index basis_size);

/// Fixed ingredients of one layer's kernel-weight problem.
struct UmklProblem {
  std::vector<Matrix> base_grams;  // K_t, each n x n
  LocalBases bases;
  Matrix distortion;   // M
  Matrix linear_gram;  // P
  double gamma = 0.1;

  Index n() const noexcept { return linear_gram.rows(); }
  Index m() const noexcept { return static_cast<Index>(base_grams.size()); }
  /// Checks shapes, M/P consistency and gamma >= 0.
  void validate() const;
};

UmklProblem make_problem(const Matrix& linear_gram, std::vector<Matrix> base_grams,
                         Index basis_size, double gamma);

/// Kernel weights on the probability simplex.
class KernelWeights {
 public:
  KernelWeights() = default;
  /// Throws InvalidArgument unless mu >= 0 and sums to 1 within 1e-10.
  explicit KernelWeights(Vector mu);
  static KernelWeights uniform(Index m);

  const Vector& values() const noexcept { return mu_; }
  Index size() const noexcept { return mu_.size(); }
  double operator[](Index t) const { return mu_(t); }

 private:
  Vector mu_;
};

/// Quadratic form mu' W mu + z' mu + constant.
struct QpForm {
  Matrix W;
  Vector z;
  double constant = 0.0;

  double value(const Vector& mu) const;
  Vector gradient(const Vector& mu) const;
};

/// Reconstruction error plus gamma-weighted locality distortion, evaluated
/// term by term from P. Independent of assemble_qp.
double objective_scalar(const UmklProblem& problem, const Vector& mu);

QpForm assemble_qp(const UmklProblem& problem);

struct SimplexQpOptions {
  int max_iter = 500;
  double tol = 1e-9;
  double backtrack = 0.5;
  int power_iterations = 50;
};

struct SimplexQpResult {
  KernelWeights weights;
  std::vector<double> objective_trace;  // objective at the start and after each accepted step
  int iterations = 0;
};

/// Euclidean projection onto {mu >= 0, sum mu = 1}.
Vector project_to_simplex(const Vector& v);

/// Projected gradient descent with backtracking from the uniform point.
SimplexQpResult solve_simplex_qp(const QpForm& qp, const SimplexQpOptions& options = {});

/// sum_t mu_t A_t for same-shaped (possibly rectangular) matrices.
Matrix weighted_sum(const std::vector<Matrix>& matrices, const KernelWeights& mu);

/// K = sum_t mu_t K_t.
GramMatrix combine(const std::vector<Matrix>& base_grams, const KernelWeights& mu);

}  // namespace mlmkl
