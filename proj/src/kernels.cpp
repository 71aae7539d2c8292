#include "mlmkl/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "mlmkl/error.hpp"
#include "fixed_order.hpp"
#include "number_text.hpp"

namespace mlmkl {

namespace {

constexpr double kPi = std::numbers::pi;

using detail::fixed_dot;

double squared_distance(const double* a, const double* b, Index d) {
  double s0 = 0.0, s1 = 0.0;
  Index k = 0;
  for (; k + 2 <= d; k += 2) {
    const double e0 = a[k] - b[k];
    const double e1 = a[k + 1] - b[k + 1];
    s0 += e0 * e0;
    s1 += e1 * e1;
  }
  for (; k < d; ++k) {
    const double e = a[k] - b[k];
    s0 += e * e;
  }
  return s0 + s1;
}

// Angle between x and y given their products. Near-parallel pairs use the
// difference and sum of the unit vectors, where acos of the cosine would lose
// about half the digits.
double pair_angle(const double* x, const double* y, Index d, double xy, double xx, double yy) {
  const double c = std::clamp(xy / std::sqrt(xx * yy), -1.0, 1.0);
  if (std::abs(c) < 0.9) return std::acos(c);
  const double sx = 1.0 / std::sqrt(xx);
  const double sy = 1.0 / std::sqrt(yy);
  double diff = 0.0, sum = 0.0;
  for (Index k = 0; k < d; ++k) {
    const double a = x[k] * sx;
    const double b = y[k] * sy;
    diff += (a - b) * (a - b);
    sum += (a + b) * (a + b);
  }
  return 2.0 * std::atan2(std::sqrt(diff), std::sqrt(sum));
}

// 1 - J_n(theta) / J_n(0), which is one minus the cosine seen by the next
// composition level. Small angles use series to avoid cancellation.
double next_level_gap(double theta, int degree) {
  const double t2 = theta * theta;
  switch (degree) {
    case 0:
      return theta / kPi;
    case 1: {
      // sin t - t cos t
      const double h = theta < 0.1
                           ? theta * t2 * (1.0 / 3.0 - t2 * (1.0 / 30.0 - t2 * (1.0 / 840.0 - t2 * (1.0 / 45360.0 - t2 / 3991680.0))))
                           : std::sin(theta) - theta * std::cos(theta);
      const double s = std::sin(0.5 * theta);
      return (2.0 * kPi * s * s - h) / kPi;
    }
    default: {
      // t (1 + 2 cos^2 t) - 3 sin t cos t
      const double s = std::sin(theta);
      const double c = std::cos(theta);
      const double g = theta < 0.1
                           ? theta * t2 * t2 *
                                 (4.0 / 15.0 - t2 * (16.0 / 315.0 - t2 * (4.0 / 945.0 - t2 * (2048.0 / 9979200.0 - t2 * (40960.0 / 6227020800.0)))))
                           : theta * (1.0 + 2.0 * c * c) - 3.0 * s * c;
      return (2.0 * kPi * s * s + g) / (3.0 * kPi);
    }
  }
}

// (k(x,x) k(y,y))^(n/2) for the current level's self-kernels.
double norm_factor(double kxx, double kyy, int degree) {
  if (degree == 0) return 1.0;
  if (degree == 1) return std::sqrt(kxx * kyy);
  return kxx * kyy;
}

double arc_cosine_pair(const double* x, const double* y, Index d, double xy, double xx, double yy,
                       int degree, int depth) {
  if (xx <= 0.0 || yy <= 0.0) {
    throw Error(ErrorCode::ZeroVector, "arc-cosine kernel is undefined for a zero vector");
  }
  double theta = pair_angle(x, y, d, xy, xx, yy);
  double kxx = xx, kyy = yy;
  const double j0 = j_n(0.0, degree);
  for (int level = 1;; ++level) {
    if (!(kxx > 0.0) || !(kyy > 0.0)) {
      throw Error(ErrorCode::DegenerateRecursion,
                  "self-kernel is not positive at composition level " + std::to_string(level));
    }
    const double value = norm_factor(kxx, kyy, degree) * j_n(theta, degree) / kPi;
    if (level == depth) return value;
    // The next level's cosine is J_n(theta) / J_n(0) whatever the norms.
    const double gap = std::clamp(next_level_gap(theta, degree), 0.0, 1.0);
    theta = 2.0 * std::asin(std::sqrt(0.5 * gap));
    kxx = norm_factor(kxx, kxx, degree) * j0 / kPi;
    kyy = norm_factor(kyy, kyy, degree) * j0 / kPi;
  }
}

double polynomial_from_product(double xy, int degree, double coef0, double scale) {
  const double base = scale * xy + coef0;
  double out = 1.0;
  for (int i = 0; i < degree; ++i) out *= base;
  return out;
}

void require_same_dim(Index a, Index b) {
  if (a != b) {
    throw Error(ErrorCode::DimensionMismatch,
                "vectors of dimension " + std::to_string(a) + " and " + std::to_string(b));
  }
}

// Evaluates one pair given contiguous storage and precomputed squared norms.
double evaluate_raw(const KernelSpec& spec, const double* x, const double* y, Index d,
                    double xx, double yy) {
  switch (spec.family) {
    case KernelFamily::ArcCosine:
      return arc_cosine_pair(x, y, d, fixed_dot(x, y, d), xx, yy, spec.degree, spec.depth);
    case KernelFamily::Gaussian:
      return std::exp(-spec.gamma * squared_distance(x, y, d));
    case KernelFamily::Polynomial:
      return polynomial_from_product(fixed_dot(x, y, d), spec.degree, spec.coef0, spec.scale);
    case KernelFamily::Linear:
      return fixed_dot(x, y, d);
  }
  return 0.0;
}

std::vector<double> squared_norms(const Matrix& columns) {
  std::vector<double> out(static_cast<std::size_t>(columns.cols()));
  for (Index j = 0; j < columns.cols(); ++j) {
    const double* c = columns.col(j).data();
    out[static_cast<std::size_t>(j)] = fixed_dot(c, c, columns.rows());
  }
  return out;
}

}  // namespace

KernelSpec KernelSpec::arc_cosine(int degree, int depth) {
  KernelSpec s;
  s.family = KernelFamily::ArcCosine;
  s.degree = degree;
  s.depth = depth;
  return s;
}

KernelSpec KernelSpec::gaussian(double gamma) {
  KernelSpec s;
  s.family = KernelFamily::Gaussian;
  s.gamma = gamma;
  return s;
}

KernelSpec KernelSpec::polynomial(int degree, double coef0, double scale) {
  KernelSpec s;
  s.family = KernelFamily::Polynomial;
  s.degree = degree;
  s.coef0 = coef0;
  s.scale = scale;
  return s;
}

KernelSpec KernelSpec::linear() { return KernelSpec{}; }

void KernelSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidSpec, what); };
  if (family != KernelFamily::ArcCosine && depth != 1) fail("only arc-cosine kernels compose (depth must be 1)");
  switch (family) {
    case KernelFamily::ArcCosine:
      if (degree < 0 || degree > 2) fail("arc-cosine degree must be 0, 1 or 2");
      if (depth < 1) fail("arc-cosine depth must be >= 1");
      break;
    case KernelFamily::Gaussian:
      if (!(gamma > 0.0) || !std::isfinite(gamma)) fail("gaussian gamma must be positive");
      break;
    case KernelFamily::Polynomial:
      if (degree < 1) fail("polynomial degree must be >= 1");
      if (!(scale > 0.0) || !std::isfinite(scale)) fail("polynomial scale must be positive");
      if (!std::isfinite(coef0)) fail("polynomial coef0 must be finite");
      break;
    case KernelFamily::Linear:
      break;
  }
}

std::string KernelSpec::to_string() const {
  using detail::format_number;
  switch (family) {
    case KernelFamily::ArcCosine:
      return "arccos(n=" + std::to_string(degree) + ",L=" + std::to_string(depth) + ")";
    case KernelFamily::Gaussian:
      return "rbf(gamma=" + format_number(gamma) + ")";
    case KernelFamily::Polynomial:
      return "poly(degree=" + std::to_string(degree) + ",coef0=" + format_number(coef0) +
             ",scale=" + format_number(scale) + ")";
    case KernelFamily::Linear:
      return "linear";
  }
  return {};
}

KernelSpec KernelSpec::parse(std::string_view text) {
  const std::string original(text);
  auto fail = [&](const std::string& why) -> KernelSpec {
    throw Error(ErrorCode::InvalidSpec, "cannot parse kernel '" + original + "': " + why);
  };
  text = detail::trim(text);
  const auto open = text.find('(');
  const std::string_view name = detail::trim(text.substr(0, open));
  std::string_view args;
  if (open != std::string_view::npos) {
    if (text.back() != ')') return fail("missing ')'");
    args = text.substr(open + 1, text.size() - open - 2);
  }

  KernelSpec spec;
  if (name == "arccos") {
    spec = arc_cosine(1, 1);
  } else if (name == "rbf") {
    spec = gaussian(1.0);
  } else if (name == "poly") {
    spec = polynomial(2);
  } else if (name == "linear") {
    spec = linear();
  } else {
    return fail("unknown kernel family");
  }

  auto as_int = [&](std::string_view key, double v) {
    if (v != std::floor(v)) fail(std::string(key) + " must be an integer");
    return static_cast<int>(v);
  };

  while (!detail::trim(args).empty()) {
    const auto comma = args.find(',');
    const std::string_view item = detail::trim(args.substr(0, comma));
    args = comma == std::string_view::npos ? std::string_view{} : args.substr(comma + 1);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) return fail("expected key=value");
    const std::string_view key = detail::trim(item.substr(0, eq));
    const auto value = detail::parse_number(detail::trim(item.substr(eq + 1)));
    if (!value) return fail("bad number for " + std::string(key));

    if (spec.family == KernelFamily::ArcCosine && key == "n") {
      spec.degree = as_int(key, *value);
    } else if (spec.family == KernelFamily::ArcCosine && key == "L") {
      spec.depth = as_int(key, *value);
    } else if (spec.family == KernelFamily::Gaussian && key == "gamma") {
      spec.gamma = *value;
    } else if (spec.family == KernelFamily::Polynomial && key == "degree") {
      spec.degree = as_int(key, *value);
    } else if (spec.family == KernelFamily::Polynomial && key == "coef0") {
      spec.coef0 = *value;
    } else if (spec.family == KernelFamily::Polynomial && key == "scale") {
      spec.scale = *value;
    } else {
      return fail("unknown parameter '" + std::string(key) + "'");
    }
  }
  spec.validate();
  return spec;
}

double angle(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) {
  require_same_dim(x.size(), y.size());
  const Vector xc = x, yc = y;
  const double xx = fixed_dot(xc.data(), xc.data(), xc.size());
  const double yy = fixed_dot(yc.data(), yc.data(), yc.size());
  if (xx == 0.0 || yy == 0.0) throw Error(ErrorCode::ZeroVector, "angle with a zero vector");
  return pair_angle(xc.data(), yc.data(), xc.size(), fixed_dot(xc.data(), yc.data(), xc.size()), xx, yy);
}

double j_n(double theta, int degree) {
  const double s = std::sin(theta);
  const double c = std::cos(theta);
  switch (degree) {
    case 0: return kPi - theta;
    case 1: return s + (kPi - theta) * c;
    case 2: return 3.0 * s * c + (kPi - theta) * (1.0 + 2.0 * c * c);
    default:
      throw Error(ErrorCode::UnsupportedDegree, "degree " + std::to_string(degree));
  }
}

double arc_cosine(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y,
                  int degree, int depth) {
  return evaluate(KernelSpec::arc_cosine(degree, depth), x, y);
}

double gaussian(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y,
                double gamma) {
  return evaluate(KernelSpec::gaussian(gamma), x, y);
}

double polynomial(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y,
                  int degree, double coef0, double scale) {
  return evaluate(KernelSpec::polynomial(degree, coef0, scale), x, y);
}

double linear(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) {
  return evaluate(KernelSpec::linear(), x, y);
}

double evaluate(const KernelSpec& spec, const Eigen::Ref<const Vector>& x,
                const Eigen::Ref<const Vector>& y) {
  spec.validate();
  require_same_dim(x.size(), y.size());
  const Vector xc = x, yc = y;
  const Index d = xc.size();
  return evaluate_raw(spec, xc.data(), yc.data(), d, fixed_dot(xc.data(), xc.data(), d),
                      fixed_dot(yc.data(), yc.data(), d));
}

GramMatrix::GramMatrix(Matrix values, std::optional<KernelSpec> spec)
    : values_(std::move(values)), spec_(std::move(spec)) {
  if (values_.rows() != values_.cols()) {
    throw Error(ErrorCode::ShapeError, "Gram matrix must be square");
  }
}

GramMatrix gram(const Matrix& samples, const KernelSpec& spec) {
  spec.validate();
  if (samples.rows() == 0) throw Error(ErrorCode::InvalidArgument, "gram of an empty sample set");
  const Matrix cols = samples.transpose();
  const Index n = cols.cols();
  const Index d = cols.rows();
  const std::vector<double> norms = squared_norms(cols);
  Matrix values(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i <= j; ++i) {
      const double v = evaluate_raw(spec, cols.col(i).data(), cols.col(j).data(), d,
                                    norms[static_cast<std::size_t>(i)],
                                    norms[static_cast<std::size_t>(j)]);
      values(i, j) = v;
      values(j, i) = v;
    }
  }
  return GramMatrix(std::move(values), spec);
}

Matrix cross_gram(const Matrix& rows, const Matrix& cols, const KernelSpec& spec) {
  spec.validate();
  require_same_dim(rows.cols(), cols.cols());
  const Matrix a = rows.transpose();
  const Matrix b = cols.transpose();
  const Index d = a.rows();
  const std::vector<double> a_norms = squared_norms(a);
  const std::vector<double> b_norms = squared_norms(b);
  Matrix out(rows.rows(), cols.rows());
  for (Index j = 0; j < b.cols(); ++j) {
    for (Index i = 0; i < a.cols(); ++i) {
      out(i, j) = evaluate_raw(spec, a.col(i).data(), b.col(j).data(), d,
                               a_norms[static_cast<std::size_t>(i)],
                               b_norms[static_cast<std::size_t>(j)]);
    }
  }
  return out;
}

}  // namespace mlmkl
