#include <doctest.h>

#include <vector>

#include "fednew/linalg.hpp"
#include "support.hpp"

using namespace fednew;

TEST_CASE("cholesky of the identity is the identity") {
  const auto f = linalg::cholesky(MatrixXd::Identity(5, 5));
  CHECK((MatrixXd(f.lower()) - MatrixXd::Identity(5, 5)).norm() == 0.0);
}

TEST_CASE("cholesky of a 2x2 matches the hand factorization") {
  MatrixXd a(2, 2);
  a << 4, 2, 2, 3;
  const auto f = linalg::cholesky(a);
  CHECK(f.lower()(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(f.lower()(0, 1) == 0.0);
  CHECK(f.lower()(1, 0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(f.lower()(1, 1) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
}

TEST_CASE("cholesky rejects an indefinite matrix and names the pivot") {
  MatrixXd a = MatrixXd::Identity(3, 3);
  a(2, 2) = -1;
  try {
    linalg::cholesky(a);
    FAIL("expected FactorizationError");
  } catch (const linalg::FactorizationError& e) {
    CHECK(e.pivot() == 2);
  }
  MatrixXd nan = MatrixXd::Identity(2, 2);
  nan(0, 0) = std::nan("");
  CHECK_THROWS_AS(linalg::cholesky(nan), linalg::FactorizationError);
}

TEST_CASE("cholesky uses the symmetric part of the input") {
  MatrixXd a(2, 2);
  a << 4, 1, 3, 3;  // symmetric part is [[4,2],[2,3]]
  const auto f = linalg::cholesky(a);
  CHECK(f.lower()(1, 0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("solve recovers a constructed solution") {
  test::Rng rng(11);
  const MatrixXd a = rng.spd(20);
  const VectorXd v = rng.vector(20);
  const auto f = linalg::cholesky(a);
  CHECK((linalg::solve(f, a * v) - v).norm() <= 1e-10 * v.norm());
  CHECK((f.reconstruct() - a).norm() <= 1e-10 * a.norm());
  CHECK((f.lower().diagonal().array() > 0).all());
}

TEST_CASE("solve with simple factors") {
  test::Rng rng(12);
  const VectorXd v = rng.vector(6);
  CHECK(linalg::solve(linalg::cholesky(MatrixXd::Identity(6, 6)), v) == v);
  const VectorXd half = linalg::solve(linalg::cholesky(2.0 * MatrixXd::Identity(6, 6)), v);
  CHECK((half - v / 2).norm() <= 1e-15);
}

TEST_CASE("solve leaves a small residual on random systems") {
  test::Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixXd a = rng.spd(15);
    const VectorXd b = rng.vector(15);
    const VectorXd z = linalg::cholesky(a).solve(b);
    CHECK((a * z - b).norm() <= 1e-10 * b.norm());
  }
}

TEST_CASE("solve is linear") {
  test::Rng rng(14);
  const auto f = linalg::cholesky(rng.spd(12));
  const VectorXd u = rng.vector(12), w = rng.vector(12);
  const double a = 1.7, b = -0.3;
  const VectorXd lhs = f.solve(a * u + b * w);
  const VectorXd rhs = a * f.solve(u) + b * f.solve(w);
  CHECK((lhs - rhs).norm() <= 1e-10 * rhs.norm());
}

TEST_CASE("refactoring a reconstruction reproduces the factor") {
  test::Rng rng(15);
  const auto f = linalg::cholesky(rng.spd(10));
  const auto g = linalg::cholesky(f.reconstruct());
  CHECK((MatrixXd(f.lower()) - MatrixXd(g.lower())).norm() <= 1e-10);
}

TEST_CASE("solve rejects a mismatched right-hand side") {
  const auto f = linalg::cholesky(MatrixXd::Identity(3, 3));
  CHECK_THROWS_AS(f.solve(VectorXd::Ones(4)), DimensionError);
  CHECK_THROWS_AS(linalg::cholesky(MatrixXd::Ones(2, 3)), DimensionError);
}

TEST_CASE("deterministic mean") {
  test::Rng rng(16);
  const VectorXd v = rng.vector(7);
  std::vector<VectorXd> one{v};
  CHECK(linalg::deterministic_mean<double>(one) == v);
  std::vector<VectorXd> pair{v, -v};
  CHECK(linalg::deterministic_mean<double>(pair).norm() == 0.0);
  std::vector<VectorXd> none;
  CHECK_THROWS(linalg::deterministic_mean<double>(none));
  std::vector<VectorXd> ragged{v, VectorXd::Zero(3)};
  CHECK_THROWS_AS(linalg::deterministic_mean<double>(ragged), DimensionError);
}

TEST_CASE("deterministic mean agrees with an extended-precision mean") {
  test::Rng rng(17);
  std::vector<VectorXd> vs;
  for (int i = 0; i < 10; ++i) vs.push_back(rng.vector(30) * 1e3);
  const VectorXd mean = linalg::deterministic_mean<double>(vs);
  for (Index j = 0; j < 30; ++j) {
    long double acc = 0;
    for (const auto& v : vs) acc += static_cast<long double>(v(j));
    const double ref = static_cast<double>(acc / vs.size());
    CHECK(std::abs(mean(j) - ref) <= 1e-13 * std::max(1.0, std::abs(ref)));
  }
  // Same inputs, same order: identical bits.
  CHECK(linalg::deterministic_mean<double>(vs) == mean);
}

TEST_CASE("spectral norm by power iteration") {
  test::Rng rng(18);
  const MatrixXd a = rng.spd(12);
  const double ref = Eigen::SelfAdjointEigenSolver<MatrixXd>(a).eigenvalues().maxCoeff();
  CHECK(linalg::spectral_norm(a, 2000) == doctest::Approx(ref).epsilon(1e-8));
  CHECK(linalg::spectral_norm(MatrixXd::Zero(3, 3)) == 0.0);
}
