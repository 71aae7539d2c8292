#pragma once

#include <span>
#include <vector>

#include "mlmkl/kernels.hpp"

namespace mlmkl {

struct SvmOptions {
  double C = 10.0;
  double tol = 1e-3;
  long max_iter = 0;              // 0: max(10^7, 100 n)
  bool record_objective = false;  // keep the dual objective after every SMO step
};

/// Soft-margin binary SVM dual solution over the full training set.
struct BinarySvm {
  Vector alpha;   // dual variables, 0 <= alpha_i <= C
  Vector labels;  // +1 / -1
  double bias = 0.0;
  long iterations = 0;
  std::vector<double> objective_trace;

  /// alpha_i * y_i.
  Vector coefficients() const { return alpha.cwiseProduct(labels); }
};

/// SMO with maximal-violating-pair selection. Labels must be +1 or -1, both present.
BinarySvm train_binary(const Matrix& gram, std::span<const int> labels, const SvmOptions& options);

/// 0.5 a'Qa - sum(a) with Q_ij = y_i y_j K_ij.
double dual_objective(const Matrix& gram, const Vector& labels, const Vector& alpha);

/// Largest KKT violation m(alpha) - M(alpha); <= tol at an approximate optimum.
double kkt_violation(const Matrix& gram, const Vector& labels, const Vector& alpha, double C);

/// One-vs-rest multiclass model. Support vectors are the union over machines;
/// coefficients(s, c) is alpha*y of support vector s in the machine for classes[c].
struct SvmModel {
  KernelSpec spec;
  double C = 10.0;
  std::vector<int> classes;             // ascending
  std::vector<Index> support_indices;   // into the training set
  Matrix support_vectors;               // n_sv x d (filled by train_svm)
  Matrix coefficients;                  // n_sv x classes
  Vector biases;                        // per class

  Index n_support() const noexcept { return static_cast<Index>(support_indices.size()); }
};

SvmModel train_multiclass(const Matrix& gram, std::span<const int> labels, const SvmOptions& options);

/// Computes the Gram of `samples` under `spec`, trains, and stores the support vectors.
SvmModel train_svm(const Matrix& samples, std::span<const int> labels, const KernelSpec& spec,
                   const SvmOptions& options);

/// Per-class decision values for kernel rows against the support vectors (t x n_sv).
Matrix decision_values(const SvmModel& model, const Matrix& cross);

/// Argmax of the decision values; exact ties go to the smaller class id.
std::vector<int> predict(const SvmModel& model, const Matrix& cross);

std::vector<int> predict_samples(const SvmModel& model, const Matrix& samples);

}  // namespace mlmkl
