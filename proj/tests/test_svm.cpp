#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>

#include "mlmkl/error.hpp"
#include "mlmkl/svm.hpp"
#include "test_support.hpp"

using namespace mlmkl;

namespace {

Vector as_vector(const std::vector<int>& y) {
  Vector v(static_cast<Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) v(static_cast<Index>(i)) = y[i];
  return v;
}

// Projection onto {0 <= a <= C, y'a = 0} by bisection on the multiplier.
Vector project_dual(const Vector& v, const Vector& y, double C) {
  auto at = [&](double lambda) { return (v - lambda * y).cwiseMax(0.0).cwiseMin(C).eval(); };
  double lo = -1.0, hi = 1.0;
  while (y.dot(at(lo)) < 0) lo *= 2;
  while (y.dot(at(hi)) > 0) hi *= 2;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (y.dot(at(mid)) > 0 ? lo : hi) = mid;
  }
  return at(0.5 * (lo + hi));
}

// Plain projected gradient on the dual; slow but independent of SMO.
double brute_force_dual(const Matrix& k, const Vector& y, double C) {
  const Matrix q = (y * y.transpose()).cwiseProduct(k);
  const double lipschitz = std::max(q.operatorNorm(), 1e-12);
  Vector a = Vector::Zero(y.size());
  for (int it = 0; it < 50000; ++it) {
    a = project_dual(a - (q * a - Vector::Ones(y.size())) / lipschitz, y, C);
  }
  return dual_objective(k, y, a);
}

}  // namespace

TEST_CASE("two points: both support vectors, boundary at the midpoint") {
  Matrix x(2, 1);
  x << -1, 1;
  const std::vector<int> y = {-1, 1};
  const Matrix k = x * x.transpose();
  const BinarySvm svm = train_binary(k, y, {});
  CHECK(svm.alpha(0) > 0);
  CHECK(svm.alpha(1) > 0);
  CHECK(svm.alpha(0) == doctest::Approx(0.5));
  const Vector f = k * svm.coefficients() + Vector::Constant(2, svm.bias);
  CHECK(f(0) == doctest::Approx(-1.0));
  CHECK(f(1) == doctest::Approx(1.0));
  // Decision value at the midpoint x = 0 is the bias alone.
  CHECK(std::abs(svm.bias) <= 1e-9);
}

TEST_CASE("precondition failures") {
  const Matrix k = Matrix::Identity(3, 3);
  const std::vector<int> same = {1, 1, 1};
  try {
    train_binary(k, same, {});
    FAIL("expected DegenerateLabels");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateLabels);
  }
  CHECK_THROWS_AS(train_binary(k, std::vector<int>{1, 0, -1}, {}), Error);
  Matrix skew = Matrix::Identity(3, 3);
  skew(0, 1) = 0.5;
  CHECK_THROWS_AS(train_binary(skew, std::vector<int>{1, -1, 1}, {}), Error);
  CHECK_THROWS_AS(train_multiclass(k, std::vector<int>{4, 4, 4}, {}), Error);
}

TEST_CASE("separable blobs are classified perfectly") {
  std::mt19937_64 rng(41);
  std::vector<int> y;
  const Matrix x = testing::two_blobs(rng, 20, 5, 2.0, 0.5, y, 0);
  const SvmModel model = train_svm(x, y, KernelSpec::linear(), {});
  CHECK(predict_samples(model, x) == y);
  const SvmModel arc = train_svm(x, y, KernelSpec::arc_cosine(1, 1), {});
  CHECK(predict_samples(arc, x) == y);
  CHECK(model.classes == std::vector<int>{0, 1});
}

TEST_CASE("dual feasibility and KKT on random instances") {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 40; ++trial) {
    const Index n = testing::uniform_int(rng, 4, 40);
    const Matrix x = testing::random_matrix(rng, n, 3);
    std::vector<int> y(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = (x(i, 0) + 0.3 * x(i, 1) > 0) ? 1 : -1;
    y[0] = 1;
    y[1] = -1;
    const double C = std::array{0.1, 1.0, 10.0, 100.0}[static_cast<std::size_t>(trial % 4)];
    const Matrix k = gram(x, KernelSpec::gaussian(0.5)).values();
    SvmOptions opts;
    opts.C = C;
    const BinarySvm svm = train_binary(k, y, opts);
    CHECK(svm.alpha.minCoeff() >= 0.0);
    CHECK(svm.alpha.maxCoeff() <= C);
    CHECK(std::abs(svm.coefficients().sum()) <= 1e-6);
    CHECK(kkt_violation(k, as_vector(y), svm.alpha, C) <= 1e-3);
  }
}

TEST_CASE("agrees with a brute-force dual solver") {
  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 12; ++trial) {
    const Index n = testing::uniform_int(rng, 4, 20);
    const Matrix x = testing::random_matrix(rng, n, 2);
    std::vector<int> y(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = (i % 2 == 0) ? 1 : -1;
    const Matrix k = gram(x, KernelSpec::polynomial(2, 1.0, 0.5)).values();
    SvmOptions opts;
    opts.C = trial % 2 == 0 ? 1.0 : 10.0;
    const BinarySvm svm = train_binary(k, y, opts);
    const double smo = dual_objective(k, as_vector(y), svm.alpha);
    const double oracle = brute_force_dual(k, as_vector(y), opts.C);
    CHECK(std::abs(smo - oracle) <= 1e-3 * std::max(1.0, std::abs(oracle)));
  }
}

TEST_CASE("dual objective never increases between SMO steps") {
  std::mt19937_64 rng(44);
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = testing::uniform_int(rng, 5, 30);
    const Matrix x = testing::random_matrix(rng, n, 4);
    std::vector<int> y(static_cast<std::size_t>(n));
    for (Index i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = testing::uniform_int(rng, 0, 1) ? 1 : -1;
    y[0] = 1;
    y[1] = -1;
    SvmOptions opts;
    opts.record_objective = true;
    const BinarySvm svm = train_binary(gram(x, KernelSpec::arc_cosine(0, 2)).values(), y, opts);
    REQUIRE(!svm.objective_trace.empty());
    for (std::size_t s = 1; s < svm.objective_trace.size(); ++s) {
      CHECK(svm.objective_trace[s] <= svm.objective_trace[s - 1] + 1e-12);
    }
  }
}

TEST_CASE("multiclass prediction") {
  std::mt19937_64 rng(45);
  std::vector<int> y;
  Matrix x = testing::two_blobs(rng, 10, 3, 3.0, 0.3, y, 5);
  // Third class along a different axis.
  Matrix extra = testing::random_matrix(rng, 10, 3, 0.3);
  extra.col(1).array() += 6.0;
  Matrix all(30, 3);
  all << x, extra;
  for (int i = 0; i < 10; ++i) y.push_back(2);
  const SvmModel model = train_svm(all, y, KernelSpec::gaussian(0.2), {});
  CHECK(model.classes == std::vector<int>{2, 5, 6});
  CHECK(model.coefficients.cols() == 3);
  CHECK(predict_samples(model, all) == y);
  CHECK(predict_samples(model, Matrix(0, 3)).empty());
}

TEST_CASE("symmetric tie goes to the smaller class id") {
  Matrix x(2, 1);
  x << -1, 1;
  const std::vector<int> y = {7, 3};
  const SvmModel model = train_svm(x, y, KernelSpec::linear(), {});
  CHECK(model.n_support() == 2);
  const Matrix midpoint = Matrix::Zero(1, 1);
  const Matrix dv = decision_values(model, cross_gram(midpoint, model.support_vectors, model.spec));
  CHECK(dv(0, 0) == dv(0, 1));
  CHECK(predict_samples(model, midpoint) == std::vector<int>{3});
  Matrix probes(2, 1);
  probes << -0.5, 0.5;
  CHECK(predict_samples(model, probes) == std::vector<int>{7, 3});
}
