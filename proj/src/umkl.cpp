#include "mlmkl/umkl.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>

#include <Eigen/QR>

#include "mlmkl/error.hpp"

namespace mlmkl {

LocalBases::LocalBases(std::vector<std::vector<Index>> members, Index n)
    : members_(std::move(members)), n_(n) {
  if (static_cast<Index>(members_.size()) != n_) {
    throw Error(ErrorCode::ShapeError, "one basis set per sample required");
  }
  basis_size_ = members_.empty() ? 0 : static_cast<Index>(members_.front().size());
  for (std::size_t i = 0; i < members_.size(); ++i) {
    auto& set = members_[i];
    std::sort(set.begin(), set.end());
    if (static_cast<Index>(set.size()) != basis_size_) {
      throw Error(ErrorCode::InvalidBasisSize, "basis sets must all have the same size");
    }
    if (std::adjacent_find(set.begin(), set.end()) != set.end()) {
      throw Error(ErrorCode::InvalidArgument, "duplicate basis member");
    }
    for (Index j : set) {
      if (j < 0 || j >= n_ || j == static_cast<Index>(i)) {
        throw Error(ErrorCode::InvalidArgument, "basis member out of range or self");
      }
    }
  }
}

Matrix LocalBases::mask() const {
  Matrix d = Matrix::Zero(n_, n_);
  for (Index i = 0; i < n_; ++i) {
    for (Index j : members(i)) d(j, i) = 1.0;
  }
  return d;
}

Matrix distortion_matrix(const Matrix& linear_gram) {
  const Index n = linear_gram.rows();
  Matrix m(n, n);
  for (Index j = 0; j < n; ++j) {
    for (Index i = 0; i < n; ++i) {
      m(i, j) = i == j ? 0.0 : linear_gram(i, i) + linear_gram(j, j) - 2.0 * linear_gram(i, j);
    }
  }
  return m;
}

LocalBases build_local_bases(const Matrix& linear_gram, Index basis_size) {
  const Index n = linear_gram.rows();
  if (linear_gram.cols() != n) throw Error(ErrorCode::ShapeError, "linear Gram must be square");
  if (basis_size < 1 || basis_size > n - 1) {
    throw Error(ErrorCode::InvalidBasisSize,
                "basis size " + std::to_string(basis_size) + " outside [1, " +
                    std::to_string(n - 1) + "]");
  }
  const Matrix dist = distortion_matrix(linear_gram);
  std::vector<std::vector<Index>> members(static_cast<std::size_t>(n));
  std::vector<Index> order;
  for (Index i = 0; i < n; ++i) {
    order.clear();
    for (Index j = 0; j < n; ++j) {
      if (j != i) order.push_back(j);
    }
    std::partial_sort(order.begin(), order.begin() + basis_size, order.end(),
                      [&](Index a, Index b) {
                        if (dist(i, a) != dist(i, b)) return dist(i, a) < dist(i, b);
                        return a < b;
                      });
    members[static_cast<std::size_t>(i)].assign(order.begin(), order.begin() + basis_size);
  }
  return LocalBases(std::move(members), n);
}

void UmklProblem::validate() const {
  const Index size = n();
  if (linear_gram.cols() != size || distortion.rows() != size || distortion.cols() != size) {
    throw Error(ErrorCode::ShapeError, "P and M must be n x n");
  }
  if (bases.n() != size) throw Error(ErrorCode::ShapeError, "local bases do not match n");
  if (base_grams.empty()) throw Error(ErrorCode::InvalidArgument, "at least one base kernel required");
  for (const Matrix& k : base_grams) {
    if (k.rows() != size || k.cols() != size) {
      throw Error(ErrorCode::ShapeError, "base Gram matrices must share dimension n");
    }
  }
  if (!(gamma >= 0.0)) throw Error(ErrorCode::InvalidArgument, "gamma must be nonnegative");
  for (Index j = 0; j < size; ++j) {
    for (Index i = 0; i < size; ++i) {
      const double expected =
          i == j ? 0.0 : linear_gram(i, i) + linear_gram(j, j) - 2.0 * linear_gram(i, j);
      const double scale = std::max({1.0, std::abs(linear_gram(i, i)), std::abs(linear_gram(j, j))});
      if (std::abs(distortion(i, j) - expected) > 1e-10 * scale) {
        throw Error(ErrorCode::InvalidArgument, "distortion matrix inconsistent with P");
      }
    }
  }
}

UmklProblem make_problem(const Matrix& linear_gram, std::vector<Matrix> base_grams,
                         Index basis_size, double gamma) {
  UmklProblem problem{std::move(base_grams), build_local_bases(linear_gram, basis_size),
                      distortion_matrix(linear_gram), linear_gram, gamma};
  problem.validate();
  return problem;
}

KernelWeights::KernelWeights(Vector mu) : mu_(std::move(mu)) {
  if (mu_.size() == 0) throw Error(ErrorCode::InvalidArgument, "empty kernel weights");
  for (Index t = 0; t < mu_.size(); ++t) {
    if (!(mu_(t) >= 0.0)) throw Error(ErrorCode::InvalidArgument, "kernel weights must be nonnegative");
  }
  if (std::abs(mu_.sum() - 1.0) > 1e-10) {
    throw Error(ErrorCode::InvalidArgument, "kernel weights must sum to 1");
  }
}

KernelWeights KernelWeights::uniform(Index m) {
  return KernelWeights(Vector::Constant(m, 1.0 / static_cast<double>(m)));
}

double QpForm::value(const Vector& mu) const { return mu.dot(W * mu) + z.dot(mu) + constant; }

Vector QpForm::gradient(const Vector& mu) const { return 2.0 * (W * mu) + z; }

double objective_scalar(const UmklProblem& problem, const Vector& mu) {
  if (mu.size() != problem.m()) throw Error(ErrorCode::DimensionMismatch, "mu length != m");
  const Matrix& p = problem.linear_gram;
  double reconstruction = 0.0;
  double distortion = 0.0;
  for (Index i = 0; i < problem.n(); ++i) {
    const auto& basis = problem.bases.members(i);
    std::vector<double> a(basis.size());
    for (std::size_t b = 0; b < basis.size(); ++b) {
      double k = 0.0;
      for (Index t = 0; t < problem.m(); ++t) {
        k += mu(t) * problem.base_grams[static_cast<std::size_t>(t)](i, basis[b]);
      }
      a[b] = k;
    }
    // |x_i - sum_j a_j x_j|^2 expanded through inner products.
    double err = p(i, i);
    for (std::size_t b = 0; b < basis.size(); ++b) {
      err -= 2.0 * a[b] * p(i, basis[b]);
      for (std::size_t c = 0; c < basis.size(); ++c) {
        err += a[b] * a[c] * p(basis[b], basis[c]);
      }
      distortion += a[b] * problem.distortion(i, basis[b]);
    }
    reconstruction += err;
  }
  return 0.5 * reconstruction + problem.gamma * distortion;
}

QpForm assemble_qp(const UmklProblem& problem) {
  problem.validate();
  const Index m = problem.m();
  const Index nb = problem.bases.basis_size();
  const Matrix& p = problem.linear_gram;

  QpForm qp{Matrix::Zero(m, m), Vector::Zero(m), 0.0};
  Matrix u(nb, m);     // columns: k_{t,i} restricted to B_i
  Matrix p_local(nb, nb);
  for (Index i = 0; i < problem.n(); ++i) {
    const auto& basis = problem.bases.members(i);
    for (Index b = 0; b < nb; ++b) {
      const Index j = basis[static_cast<std::size_t>(b)];
      for (Index t = 0; t < m; ++t) u(b, t) = problem.base_grams[static_cast<std::size_t>(t)](i, j);
      for (Index c = 0; c < nb; ++c) p_local(b, c) = p(j, basis[static_cast<std::size_t>(c)]);
    }
    qp.W.noalias() += 0.5 * u.transpose() * p_local * u;
    for (Index b = 0; b < nb; ++b) {
      const Index j = basis[static_cast<std::size_t>(b)];
      const double coeff = problem.gamma * problem.distortion(i, j) - p(i, j);
      qp.z += coeff * u.row(b).transpose();
    }
    qp.constant += 0.5 * p(i, i);
  }
  qp.W = 0.5 * (qp.W + qp.W.transpose()).eval();
  return qp;
}

Vector project_to_simplex(const Vector& v) {
  const Index m = v.size();
  std::vector<double> sorted(v.data(), v.data() + m);
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  double cumulative = 0.0;
  double threshold = 0.0;
  for (Index k = 0; k < m; ++k) {
    cumulative += sorted[static_cast<std::size_t>(k)];
    const double candidate = (cumulative - 1.0) / static_cast<double>(k + 1);
    if (sorted[static_cast<std::size_t>(k)] - candidate > 0.0) threshold = candidate;
  }
  Vector out = (v.array() - threshold).max(0.0).matrix();
  // Renormalize away rounding so the weights invariant holds tightly.
  const double total = out.sum();
  if (total > 0.0) out /= total;
  return out;
}

namespace {

double spectral_norm_estimate(const Matrix& a, int iterations) {
  const Index m = a.rows();
  Vector v = Vector::Ones(m) / std::sqrt(static_cast<double>(m));
  double estimate = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Vector w = a * v;
    const double norm = w.norm();
    if (norm == 0.0) return 0.0;
    estimate = norm;
    v = w / norm;
  }
  // A start vector orthogonal to the top eigenvector underestimates; the
  // Frobenius bound caps how far off the step can be.
  return std::max(estimate, a.norm() / std::sqrt(static_cast<double>(m)));
}

// Minimizer of the quadratic over the affine hull of the face spanned by
// `support`, via the KKT system after Jacobi scaling (base kernels can differ
// in magnitude by many orders).
std::optional<Vector> face_minimizer(const QpForm& qp, const std::vector<Index>& support) {
  const auto s = static_cast<Index>(support.size());
  Vector d(s);
  for (Index a = 0; a < s; ++a) {
    const double w = qp.W(support[static_cast<std::size_t>(a)], support[static_cast<std::size_t>(a)]);
    d(a) = w > 0.0 ? 1.0 / std::sqrt(w) : 1.0;
  }
  Matrix kkt = Matrix::Zero(s + 1, s + 1);
  Vector rhs(s + 1);
  for (Index a = 0; a < s; ++a) {
    const Index i = support[static_cast<std::size_t>(a)];
    for (Index b = 0; b < s; ++b) kkt(a, b) = 2.0 * d(a) * qp.W(i, support[static_cast<std::size_t>(b)]) * d(b);
    kkt(a, s) = d(a);
    kkt(s, a) = d(a);
    rhs(a) = -d(a) * qp.z(i);
  }
  rhs(s) = 1.0;
  const Vector sol = Eigen::CompleteOrthogonalDecomposition<Matrix>(kkt).solve(rhs);
  if (!sol.allFinite()) return std::nullopt;
  Vector mu = Vector::Zero(qp.z.size());
  for (Index a = 0; a < s; ++a) mu(support[static_cast<std::size_t>(a)]) = d(a) * sol(a);
  return mu;
}

// Moves toward the face minimizer, stopping where a weight reaches zero and
// dropping that kernel from the face. Only strict decreases are kept.
void face_steps(const QpForm& qp, Vector& mu, double& f, std::vector<double>& trace) {
  const Index m = mu.size();
  for (Index pass = 0; pass < m; ++pass) {
    std::vector<Index> support;
    for (Index t = 0; t < m; ++t) {
      if (mu(t) > 0.0) support.push_back(t);
    }
    if (support.size() < 2) return;
    const auto target = face_minimizer(qp, support);
    if (!target) return;
    const Vector direction = *target - mu;
    double t_max = 1.0;
    Index blocking = -1;
    for (Index t : support) {
      if (direction(t) < 0.0 && -mu(t) / direction(t) < t_max) {
        t_max = -mu(t) / direction(t);
        blocking = t;
      }
    }
    Vector candidate = (mu + t_max * direction).cwiseMax(0.0);
    if (blocking >= 0) candidate(blocking) = 0.0;
    const double total = candidate.sum();
    if (!(total > 0.0)) return;
    candidate /= total;
    const double fc = qp.value(candidate);
    if (!(fc < f)) return;
    mu = candidate;
    f = fc;
    trace.push_back(f);
    if (blocking < 0) return;
  }
}

}  // namespace

SimplexQpResult solve_simplex_qp(const QpForm& qp, const SimplexQpOptions& options) {
  const Index m = qp.z.size();
  if (m == 0 || qp.W.rows() != m || qp.W.cols() != m) {
    throw Error(ErrorCode::ShapeError, "QP dimensions inconsistent");
  }
  if (!qp.W.allFinite() || !qp.z.allFinite() || !std::isfinite(qp.constant)) {
    throw Error(ErrorCode::NumericalFailure, "non-finite entries in QP");
  }

  const double lipschitz = spectral_norm_estimate(2.0 * qp.W, options.power_iterations);
  const double initial_step = lipschitz > 0.0 ? 1.0 / lipschitz : 1.0;

  Vector mu = Vector::Constant(m, 1.0 / static_cast<double>(m));
  double f = qp.value(mu);
  SimplexQpResult result;
  result.objective_trace.push_back(f);

  // Each iteration first tries a longer step than the last accepted one. Once a
  // kernel with huge curvature is pinned at zero the remaining face is usually
  // far better conditioned than 1/||2W|| suggests.
  constexpr double kMaxStep = 1e100;
  double step = initial_step;
  for (int it = 0; it < options.max_iter; ++it) {
    const Vector g = qp.gradient(mu);
    double trial = std::min(step / options.backtrack, kMaxStep);
    bool accepted = false;
    bool backtracked = false;
    Vector candidate;
    double f_candidate = f;
    for (int bt = 0; bt < 800; ++bt) {
      candidate = project_to_simplex(mu - trial * g);
      if (candidate == mu) {
        // Either stationary or a step too short to register in floating point.
        if (backtracked || trial >= kMaxStep) break;
        trial = std::min(trial / options.backtrack, kMaxStep);
        continue;
      }
      const Vector delta = candidate - mu;
      f_candidate = qp.value(candidate);
      if (std::isfinite(f_candidate)) {
        const double model = f + g.dot(delta) + delta.squaredNorm() / (2.0 * trial);
        if (f_candidate <= model && f_candidate <= f) {
          accepted = true;
          break;
        }
      }
      trial *= options.backtrack;
      backtracked = true;
    }
    if (!accepted || candidate == mu) break;
    const double decrease = f - f_candidate;
    step = trial;
    mu = candidate;
    f = f_candidate;
    result.objective_trace.push_back(f);
    result.iterations = it + 1;
    face_steps(qp, mu, f, result.objective_trace);
    // A small decrease only signals convergence once the step is curvature-limited.
    if (backtracked && decrease < options.tol) break;
  }
  result.weights = KernelWeights(mu);
  return result;
}

Matrix weighted_sum(const std::vector<Matrix>& matrices, const KernelWeights& mu) {
  if (matrices.empty() || static_cast<Index>(matrices.size()) != mu.size()) {
    throw Error(ErrorCode::DimensionMismatch, "one weight per matrix required");
  }
  Matrix out = Matrix::Zero(matrices.front().rows(), matrices.front().cols());
  for (std::size_t t = 0; t < matrices.size(); ++t) {
    if (matrices[t].rows() != out.rows() || matrices[t].cols() != out.cols()) {
      throw Error(ErrorCode::ShapeError, "matrix shapes differ");
    }
    out += mu[static_cast<Index>(t)] * matrices[t];
  }
  return out;
}

GramMatrix combine(const std::vector<Matrix>& base_grams, const KernelWeights& mu) {
  return GramMatrix(weighted_sum(base_grams, mu), std::nullopt);
}

}  // namespace mlmkl
