#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>

#include "mlmkl/error.hpp"
#include "mlmkl/kernels.hpp"
#include "test_support.hpp"

using namespace mlmkl;
using std::numbers::pi;

namespace {

Vector vec(std::initializer_list<double> values) {
  Vector v(static_cast<Index>(values.size()));
  Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an mlmkl::Error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("angle of canonical vector pairs") {
  CHECK(angle(vec({1, 0}), vec({1, 0})) == 0.0);
  CHECK(angle(vec({1, 0}), vec({0, 1})) == doctest::Approx(pi / 2).epsilon(1e-15));
  CHECK(angle(vec({1, 0}), vec({-1, 0})) == doctest::Approx(pi).epsilon(1e-15));
  CHECK(code_of([] { angle(vec({0, 0}), vec({1, 0})); }) == ErrorCode::ZeroVector);
  CHECK(code_of([] { angle(vec({1, 0, 0}), vec({1, 0})); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("angular functions") {
  CHECK(j_n(0.0, 0) == doctest::Approx(pi));
  CHECK(j_n(0.0, 1) == doctest::Approx(pi));
  // theta = pi/2: sin = 1, cos = 0, so J_2 = (pi - pi/2) * 1.
  CHECK(j_n(pi / 2, 2) == doctest::Approx(pi / 2).epsilon(1e-14));
  CHECK(j_n(pi, 1) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(code_of([] { j_n(0.3, 3); }) == ErrorCode::UnsupportedDegree);
}

TEST_CASE("arc-cosine kernel values") {
  const Vector x = vec({0.3, -1.2, 2.0});
  CHECK(arc_cosine(x, x, 0, 1) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(arc_cosine(x, x, 1, 1) == doctest::Approx(x.squaredNorm()).epsilon(1e-14));
  CHECK(arc_cosine(vec({1, 0}), vec({0, 1}), 0, 1) == doctest::Approx(0.5).epsilon(1e-15));
  // Level 1 gives 1/2 with unit self-kernels, so level 2 sees cos(theta) = 1/2.
  CHECK(arc_cosine(vec({1, 0}), vec({0, 1}), 0, 2) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(code_of([] { arc_cosine(vec({0, 0}), vec({0, 1}), 1, 1); }) == ErrorCode::ZeroVector);
}

TEST_CASE("degree 2 matches a direct evaluation of the closed form") {
  const Vector x = vec({1.0, 2.0, -0.5});
  const Vector y = vec({-0.3, 0.7, 1.1});
  const double theta = std::acos(x.dot(y) / (x.norm() * y.norm()));
  const double expected = std::pow(x.norm(), 2) * std::pow(y.norm(), 2) / pi *
                          (3 * std::sin(theta) * std::cos(theta) +
                           (pi - theta) * (1 + 2 * std::cos(theta) * std::cos(theta)));
  CHECK(arc_cosine(x, y, 2, 1) == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("recursion for degree 0 keeps unit self-kernels at every depth") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix pts = testing::random_matrix(rng, 1, 6);
    const Vector x = pts.row(0).transpose();
    for (int depth = 1; depth <= 5; ++depth) {
      CHECK(arc_cosine(x, x, 0, depth) == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("degree 0 is invariant to positive rescaling of either argument") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix pts = testing::random_matrix(rng, 2, 8);
    const Vector x = pts.row(0).transpose();
    const Vector y = pts.row(1).transpose();
    const double a = scale(rng), b = scale(rng);
    for (int depth = 1; depth <= 3; ++depth) {
      CHECK(std::abs(arc_cosine(a * x, b * y, 0, depth) - arc_cosine(x, y, 0, depth)) <= 1e-12);
    }
  }
}

TEST_CASE("other families") {
  const Vector x = vec({1, 1});
  CHECK(gaussian(vec({0.2, -3}), vec({0.2, -3}), 0.7) == 1.0);
  CHECK(gaussian(vec({0, 0}), vec({1, 1}), 0.5) == doctest::Approx(std::exp(-1.0)));
  CHECK(polynomial(x, x, 2, 0.0, 1.0) == doctest::Approx(4.0));
  CHECK(polynomial(x, x, 3, 1.0, 0.5) == doctest::Approx(8.0));
  CHECK(linear(vec({1, 2}), vec({3, 4})) == 11.0);
}

TEST_CASE("kernel spec validation and text form") {
  CHECK_THROWS_AS(KernelSpec::arc_cosine(3).validate(), Error);
  CHECK_THROWS_AS(KernelSpec::arc_cosine(1, 0).validate(), Error);
  CHECK_THROWS_AS(KernelSpec::gaussian(0.0).validate(), Error);
  CHECK_THROWS_AS(KernelSpec::polynomial(0).validate(), Error);
  CHECK_THROWS_AS(KernelSpec::polynomial(2, 0.0, -1.0).validate(), Error);
  KernelSpec deep_rbf = KernelSpec::gaussian(1.0);
  deep_rbf.depth = 2;
  CHECK_THROWS_AS(deep_rbf.validate(), Error);

  CHECK(KernelSpec::arc_cosine(1, 2).to_string() == "arccos(n=1,L=2)");
  CHECK(KernelSpec::gaussian(0.01).to_string() == "rbf(gamma=0.01)");
  CHECK(KernelSpec::polynomial(3, 1, 1).to_string() == "poly(degree=3,coef0=1,scale=1)");
  CHECK(KernelSpec::linear().to_string() == "linear");

  CHECK(KernelSpec::parse(" arccos( n = 2 ) ") == KernelSpec::arc_cosine(2, 1));
  CHECK_THROWS_AS(KernelSpec::parse("rbf(sigma=1)"), Error);
  CHECK_THROWS_AS(KernelSpec::parse("cosine"), Error);
  CHECK_THROWS_AS(KernelSpec::parse("arccos(n=1.5)"), Error);
  CHECK_THROWS_AS(KernelSpec::parse("arccos(n=1"), Error);
}

TEST_CASE("kernel spec text round-trips for random parameters") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> pos(1e-6, 1e3);
  std::uniform_real_distribution<double> any(-10, 10);
  for (int trial = 0; trial < 200; ++trial) {
    KernelSpec spec;
    switch (trial % 4) {
      case 0: spec = KernelSpec::arc_cosine(static_cast<int>(trial % 3), 1 + trial % 5); break;
      case 1: spec = KernelSpec::gaussian(pos(rng)); break;
      case 2: spec = KernelSpec::polynomial(1 + trial % 4, any(rng), pos(rng)); break;
      default: spec = KernelSpec::linear(); break;
    }
    CHECK(KernelSpec::parse(spec.to_string()) == spec);
  }
}

TEST_CASE("gram and cross_gram") {
  Matrix one(1, 2);
  one << 1, 2;
  CHECK(gram(one, KernelSpec::linear()).values()(0, 0) == 5.0);

  const Matrix basis = Matrix::Identity(2, 2);
  const Matrix g = gram(basis, KernelSpec::arc_cosine(0)).values();
  CHECK(g(0, 0) == doctest::Approx(1.0));
  CHECK(g(1, 1) == doctest::Approx(1.0));
  CHECK(g(0, 1) == doctest::Approx(0.5));
  CHECK(g(1, 0) == doctest::Approx(0.5));

  Matrix with_zero(2, 2);
  with_zero << 0, 0, 1, 0;
  CHECK(code_of([&] { gram(with_zero, KernelSpec::arc_cosine(1)); }) == ErrorCode::ZeroVector);
  CHECK(code_of([&] { cross_gram(basis, Matrix::Ones(2, 3), KernelSpec::linear()); }) ==
        ErrorCode::DimensionMismatch);
}

TEST_CASE("gram properties over random sample sets") {
  std::mt19937_64 rng(77);
  const std::vector<KernelSpec> specs = {
      KernelSpec::arc_cosine(0, 1), KernelSpec::arc_cosine(1, 1), KernelSpec::arc_cosine(2, 1),
      KernelSpec::arc_cosine(0, 3), KernelSpec::arc_cosine(1, 2), KernelSpec::arc_cosine(2, 2),
      KernelSpec::gaussian(0.2),    KernelSpec::polynomial(3, 1.0, 0.5), KernelSpec::linear()};
  for (int trial = 0; trial < 20; ++trial) {
    const Index n = testing::uniform_int(rng, 1, 50);
    const Index d = testing::uniform_int(rng, 1, 20);
    const Matrix x = testing::random_matrix(rng, n, d, 0.5);
    for (const auto& spec : specs) {
      const Matrix k = gram(x, spec).values();
      CHECK(k == k.transpose());
      CHECK(k.diagonal().minCoeff() >= 0.0);
      if (spec.family == KernelFamily::Gaussian ||
          (spec.family == KernelFamily::ArcCosine && spec.degree == 0)) {
        CHECK((k.diagonal().array() - 1.0).abs().maxCoeff() <= 1e-12);
      }
      const Vector ev = Eigen::SelfAdjointEigenSolver<Matrix>(k).eigenvalues();
      CHECK(ev.minCoeff() >= -1e-8 * std::max(1.0, ev.maxCoeff()));
      // Same pairwise path as gram, so agreement is exact.
      CHECK(cross_gram(x, x, spec) == k);
      const Index i = testing::uniform_int(rng, 0, n - 1);
      const Index j = testing::uniform_int(rng, 0, n - 1);
      CHECK(k(i, j) == doctest::Approx(evaluate(spec, x.row(i).transpose(), x.row(j).transpose()))
                           .epsilon(1e-12));
    }
  }
}
