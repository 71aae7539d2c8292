#include "mlmkl/svm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "mlmkl/error.hpp"
#include "fixed_order.hpp"

namespace mlmkl {

namespace {

constexpr double kTau = 1e-12;

bool in_up(double y, double a, double c) { return (y > 0 && a < c) || (y < 0 && a > 0); }
bool in_low(double y, double a, double c) { return (y > 0 && a > 0) || (y < 0 && a < c); }

void require_symmetric(const Matrix& k) {
  if (k.rows() != k.cols()) throw Error(ErrorCode::ShapeError, "Gram matrix must be square");
  for (Index j = 0; j < k.cols(); ++j) {
    for (Index i = 0; i < j; ++i) {
      if (std::abs(k(i, j) - k(j, i)) > 1e-12 * std::max(1.0, std::abs(k(i, j)))) {
        throw Error(ErrorCode::InvalidArgument, "Gram matrix is not symmetric");
      }
    }
  }
}

}  // namespace

double dual_objective(const Matrix& gram, const Vector& labels, const Vector& alpha) {
  const Vector ya = alpha.cwiseProduct(labels);
  return 0.5 * ya.dot(gram * ya) - alpha.sum();
}

double kkt_violation(const Matrix& gram, const Vector& labels, const Vector& alpha, double C) {
  const Vector ya = alpha.cwiseProduct(labels);
  // G = Q a - e, so -y_t G_t = y_t - (K ya)_t.
  const Vector kya = gram * ya;
  double m_up = -std::numeric_limits<double>::infinity();
  double m_low = std::numeric_limits<double>::infinity();
  for (Index t = 0; t < alpha.size(); ++t) {
    const double v = labels(t) - kya(t);
    if (in_up(labels(t), alpha(t), C)) m_up = std::max(m_up, v);
    if (in_low(labels(t), alpha(t), C)) m_low = std::min(m_low, v);
  }
  return m_up - m_low;
}

BinarySvm train_binary(const Matrix& gram, std::span<const int> labels, const SvmOptions& options) {
  require_symmetric(gram);
  const Index n = gram.rows();
  if (static_cast<Index>(labels.size()) != n) {
    throw Error(ErrorCode::DimensionMismatch, "one label per sample required");
  }
  if (!(options.C > 0.0)) throw Error(ErrorCode::InvalidArgument, "C must be positive");
  bool has_pos = false, has_neg = false;
  for (int l : labels) {
    if (l == 1) has_pos = true;
    else if (l == -1) has_neg = true;
    else throw Error(ErrorCode::InvalidArgument, "binary labels must be +1 or -1");
  }
  if (!has_pos || !has_neg) throw Error(ErrorCode::DegenerateLabels, "both classes must be present");

  const double c = options.C;
  BinarySvm out;
  out.labels.resize(n);
  for (Index t = 0; t < n; ++t) out.labels(t) = labels[static_cast<std::size_t>(t)];
  const Vector& y = out.labels;
  Vector alpha = Vector::Zero(n);
  Vector grad = Vector::Constant(n, -1.0);

  const long max_iter = options.max_iter > 0 ? options.max_iter : std::max<long>(10'000'000, 100 * n);
  if (options.record_objective) out.objective_trace.push_back(0.0);

  long iter = 0;
  for (; iter < max_iter; ++iter) {
    Index i = -1, j = -1;
    double g_max = -std::numeric_limits<double>::infinity();
    double g_min = std::numeric_limits<double>::infinity();
    for (Index t = 0; t < n; ++t) {
      const double v = -y(t) * grad(t);
      if (in_up(y(t), alpha(t), c) && v > g_max) {
        g_max = v;
        i = t;
      }
      if (in_low(y(t), alpha(t), c) && v < g_min) {
        g_min = v;
        j = t;
      }
    }
    if (i < 0 || j < 0 || g_max - g_min < options.tol) break;

    const double q_ii = gram(i, i);
    const double q_jj = gram(j, j);
    const double q_ij = y(i) * y(j) * gram(i, j);
    const double old_i = alpha(i);
    const double old_j = alpha(j);
    double ai = old_i, aj = old_j;

    // Two-variable subproblem with box clipping (libsvm's case analysis, C_i = C_j).
    if (y(i) != y(j)) {
      double quad = q_ii + q_jj + 2.0 * q_ij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad(i) - grad(j)) / quad;
      const double diff = ai - aj;
      ai += delta;
      aj += delta;
      if (diff > 0) {
        if (aj < 0) { aj = 0; ai = diff; }
      } else {
        if (ai < 0) { ai = 0; aj = -diff; }
      }
      if (diff > 0) {
        if (ai > c) { ai = c; aj = c - diff; }
      } else {
        if (aj > c) { aj = c; ai = c + diff; }
      }
    } else {
      double quad = q_ii + q_jj - 2.0 * q_ij;
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad(i) - grad(j)) / quad;
      const double sum = ai + aj;
      ai -= delta;
      aj += delta;
      if (sum > c) {
        if (ai > c) { ai = c; aj = sum - c; }
      } else {
        if (aj < 0) { aj = 0; ai = sum; }
      }
      if (sum > c) {
        if (aj > c) { aj = c; ai = sum - c; }
      } else {
        if (ai < 0) { ai = 0; aj = sum; }
      }
    }

    const double d_i = ai - old_i;
    const double d_j = aj - old_j;
    alpha(i) = ai;
    alpha(j) = aj;
    // G_t += Q_ti d_i + Q_tj d_j
    grad.array() += (y.array() * gram.col(i).array()) * (y(i) * d_i) +
                    (y.array() * gram.col(j).array()) * (y(j) * d_j);
    if (options.record_objective) {
      out.objective_trace.push_back(0.5 * alpha.dot(grad - Vector::Ones(n)));
    }
  }
  if (iter == max_iter) warn("SMO reached the iteration limit before meeting the KKT tolerance");

  // rho from free variables, else midpoint of the feasible interval.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  Index free_count = 0;
  for (Index t = 0; t < n; ++t) {
    const double yg = y(t) * grad(t);
    if (alpha(t) >= c) {
      if (y(t) < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (alpha(t) <= 0) {
      if (y(t) > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++free_count;
      free_sum += yg;
    }
  }
  const double rho = free_count > 0 ? free_sum / static_cast<double>(free_count) : 0.5 * (ub + lb);

  out.alpha = std::move(alpha);
  out.bias = -rho;
  out.iterations = iter;
  return out;
}

SvmModel train_multiclass(const Matrix& gram, std::span<const int> labels, const SvmOptions& options) {
  const std::set<int> distinct(labels.begin(), labels.end());
  if (distinct.size() < 2) throw Error(ErrorCode::DegenerateLabels, "at least two classes required");

  SvmModel model;
  model.C = options.C;
  model.classes.assign(distinct.begin(), distinct.end());
  const Index n = gram.rows();
  const auto k = static_cast<Index>(model.classes.size());

  std::vector<BinarySvm> machines;
  machines.reserve(model.classes.size());
  std::vector<int> binary(labels.size());
  for (int cls : model.classes) {
    for (std::size_t t = 0; t < labels.size(); ++t) binary[t] = labels[t] == cls ? 1 : -1;
    machines.push_back(train_binary(gram, binary, options));
  }

  for (Index t = 0; t < n; ++t) {
    for (const auto& m : machines) {
      if (m.alpha(t) > 0.0) {
        model.support_indices.push_back(t);
        break;
      }
    }
  }
  model.coefficients.resize(model.n_support(), k);
  model.biases.resize(k);
  for (Index c = 0; c < k; ++c) {
    const BinarySvm& m = machines[static_cast<std::size_t>(c)];
    for (Index s = 0; s < model.n_support(); ++s) {
      const Index t = model.support_indices[static_cast<std::size_t>(s)];
      model.coefficients(s, c) = m.alpha(t) * m.labels(t);
    }
    model.biases(c) = m.bias;
  }
  return model;
}

SvmModel train_svm(const Matrix& samples, std::span<const int> labels, const KernelSpec& spec,
                   const SvmOptions& options) {
  const GramMatrix k = gram(samples, spec);
  SvmModel model = train_multiclass(k.values(), labels, options);
  model.spec = spec;
  model.support_vectors.resize(model.n_support(), samples.cols());
  for (Index s = 0; s < model.n_support(); ++s) {
    model.support_vectors.row(s) = samples.row(model.support_indices[static_cast<std::size_t>(s)]);
  }
  return model;
}

Matrix decision_values(const SvmModel& model, const Matrix& cross) {
  if (cross.cols() != model.n_support()) {
    throw Error(ErrorCode::ShapeError, "kernel rows must have one column per support vector");
  }
  Matrix out = detail::row_stable_product(cross, model.coefficients);
  out.rowwise() += model.biases.transpose();
  return out;
}

std::vector<int> predict(const SvmModel& model, const Matrix& cross) {
  const Matrix scores = decision_values(model, cross);
  std::vector<int> out(static_cast<std::size_t>(scores.rows()));
  for (Index r = 0; r < scores.rows(); ++r) {
    Index best = 0;
    for (Index c = 1; c < scores.cols(); ++c) {
      if (scores(r, c) > scores(r, best)) best = c;
    }
    out[static_cast<std::size_t>(r)] = model.classes[static_cast<std::size_t>(best)];
  }
  return out;
}

std::vector<int> predict_samples(const SvmModel& model, const Matrix& samples) {
  if (samples.rows() == 0) return {};
  if (model.n_support() == 0) {
    throw Error(ErrorCode::InvalidArgument, "model has no support vectors");
  }
  return predict(model, cross_gram(samples, model.support_vectors, model.spec));
}

}  // namespace mlmkl
