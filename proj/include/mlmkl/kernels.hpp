#pragma once

#include <optional>
#include <string>
#include <string_view>

#include "mlmkl/types.hpp"

namespace mlmkl {

enum class KernelFamily { ArcCosine, Gaussian, Polynomial, Linear };

/// Declarative description of one base kernel.
///
/// Canonical text forms: `arccos(n=1,L=2)`, `rbf(gamma=0.01)`,
/// `poly(degree=3,coef0=1,scale=1)`, `linear`. parse(to_string(s)) == s.
struct KernelSpec {
  KernelFamily family = KernelFamily::Linear;
  int degree = 1;      // arc-cosine n in {0,1,2}; polynomial exponent >= 1
  int depth = 1;       // arc-cosine composition layers L
  double gamma = 1.0;  // Gaussian width
  double coef0 = 0.0;  // polynomial offset
  double scale = 1.0;  // polynomial scale

  static KernelSpec arc_cosine(int degree, int depth = 1);
  static KernelSpec gaussian(double gamma);
  static KernelSpec polynomial(int degree, double coef0 = 0.0, double scale = 1.0);
  static KernelSpec linear();

  /// Throws Error(InvalidSpec) on a parameter outside its family's domain.
  void validate() const;

  std::string to_string() const;
  static KernelSpec parse(std::string_view text);

  bool operator==(const KernelSpec&) const = default;
};

/// Angle between two nonzero vectors, in [0, pi].
double angle(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y);

/// Angular part of the arc-cosine kernel for degree 0, 1 or 2.
double j_n(double theta, int degree);

/// Arc-cosine kernel of the given degree composed `depth` times.
double arc_cosine(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y,
                  int degree, int depth = 1);

double gaussian(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y,
                double gamma);
double polynomial(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y,
                  int degree, double coef0, double scale);
double linear(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y);

double evaluate(const KernelSpec& spec, const Eigen::Ref<const Vector>& x,
                const Eigen::Ref<const Vector>& y);

/// Symmetric n x n matrix of kernel values over one sample set. `spec` is
/// empty for matrices that are combinations of several kernels.
class GramMatrix {
 public:
  GramMatrix() = default;
  GramMatrix(Matrix values, std::optional<KernelSpec> spec);

  const Matrix& values() const noexcept { return values_; }
  const std::optional<KernelSpec>& spec() const noexcept { return spec_; }
  Index n() const noexcept { return values_.rows(); }

 private:
  Matrix values_;
  std::optional<KernelSpec> spec_;
};

/// Gram matrix of the rows of `samples`. Upper triangle computed, then mirrored.
GramMatrix gram(const Matrix& samples, const KernelSpec& spec);

/// result(i, j) = k(rows_i, cols_j).
Matrix cross_gram(const Matrix& rows, const Matrix& cols, const KernelSpec& spec);

}  // namespace mlmkl
