#include <doctest.h>

#include <cmath>

#include "cdnn/error.hpp"
#include "cdnn/spectral.hpp"
#include "support.hpp"

using namespace cdnn;
using test::max_abs;

namespace {

void check_sign_convention(const Matrix& v) {
  for (Eigen::Index j = 0; j < v.cols(); ++j) {
    for (Eigen::Index i = 0; i < v.rows(); ++i) {
      if (std::abs(v(i, j)) > 1e-8) {
        CHECK(v(i, j) > 0.0);
        break;
      }
    }
  }
}

}  // namespace

TEST_CASE("eigh of the identity") {
  const auto d = eigh(Matrix::Identity(3, 3));
  CHECK(max_abs(d.eigenvalues() - Vector::Ones(3)) < 1e-14);
  CHECK(max_abs(d.eigenvectors().transpose() * d.eigenvectors() - Matrix::Identity(3, 3)) < 1e-12);
  check_sign_convention(d.eigenvectors());
}

TEST_CASE("eigh of a diagonal matrix sorts ascending") {
  Vector diag(3);
  diag << 2, 0, 0;
  const auto d = eigh(diag.asDiagonal().toDenseMatrix());
  CHECK(d.eigenvalues()(0) == doctest::Approx(0.0));
  CHECK(d.eigenvalues()(1) == doctest::Approx(0.0));
  CHECK(d.eigenvalues()(2) == doctest::Approx(2.0));
}

TEST_CASE("eigh of a 2x2 matches the hand solution") {
  Matrix m(2, 2);
  m << 2, 1, 1, 2;
  const auto d = eigh(m);
  CHECK(d.eigenvalues()(0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(d.eigenvalues()(1) == doctest::Approx(3.0).epsilon(1e-14));
  const double s = 1.0 / std::sqrt(2.0);
  CHECK(d.eigenvectors()(0, 0) == doctest::Approx(s));
  CHECK(d.eigenvectors()(1, 0) == doctest::Approx(-s));
  CHECK(d.eigenvectors()(0, 1) == doctest::Approx(s));
  CHECK(d.eigenvectors()(1, 1) == doctest::Approx(s));
}

TEST_CASE("eigh rejects bad input") {
  CHECK_THROWS_AS(eigh(Matrix(2, 3)), Error);
  try {
    eigh(Matrix(2, 3));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::shape);
  }
  Matrix a(2, 2);
  a << 1, 2, 0, 1;
  try {
    eigh(a);
    FAIL("asymmetric input accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::symmetry);
  }
  Matrix nan = Matrix::Identity(2, 2);
  nan(0, 0) = std::nan("");
  CHECK_THROWS_AS(eigh(nan), Error);
}

TEST_CASE("tiny roundoff asymmetry is symmetrized away") {
  Matrix a(2, 2);
  a << 1, 0.5, 0.5 + 1e-13, 2;
  const auto d = eigh(a);
  CHECK(max_abs(d.reconstruct() - (a + a.transpose()) / 2) < 1e-12);
}

TEST_CASE("eigh is deterministic") {
  Rng rng = make_rng(11);
  const Matrix m = test::random_symmetric(6, rng);
  const auto a = eigh(m);
  const auto b = eigh(m);
  CHECK(a.eigenvalues() == b.eigenvalues());
  CHECK(a.eigenvectors() == b.eigenvectors());
}

TEST_CASE("random symmetric 8x8: orthonormal, reconstructs, sorted") {
  Rng rng = make_rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const Matrix m = test::random_symmetric(8, rng);
    const auto d = eigh(m);
    const Matrix& v = d.eigenvectors();
    REQUIRE(max_abs(v.transpose() * v - Matrix::Identity(8, 8)) <= 1e-10);
    REQUIRE(max_abs(d.reconstruct() - m) <= 1e-8 * std::max(1.0, operator_norm(m)));
    for (Eigen::Index i = 1; i < 8; ++i) REQUIRE(d.eigenvalues()(i - 1) <= d.eigenvalues()(i));
  }
}

TEST_CASE("apply_spectral_function") {
  Matrix m(2, 2);
  m << 1, 0, 0, 2;
  const auto d = eigh(m);
  Vector x(2);
  x << 1, 1;
  const Vector sq = apply_spectral_function(d, [](double l) { return l * l; }, x);
  CHECK(sq(0) == doctest::Approx(1.0));
  CHECK(sq(1) == doctest::Approx(4.0));
  const Vector one = apply_spectral_function(d, [](double) { return 1.0; }, x);
  CHECK(max_abs(one - x) < 1e-14);

  Rng rng = make_rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const Matrix a = test::random_symmetric(7, rng);
    const Vector y = test::random_vector(7, rng);
    const Vector z = test::random_vector(7, rng);
    const auto da = eigh(a);
    const Vector got = apply_spectral_function(da, [](double l) { return l; }, y);
    CHECK((got - a * y).norm() <= 1e-9 * std::max(1.0, (a * y).norm()));
    // linear in x
    const Vector lin = apply_spectral_function(da, [](double l) { return std::exp(l); }, 2.0 * y + z);
    const Vector sep = 2.0 * apply_spectral_function(da, [](double l) { return std::exp(l); }, y) +
                       apply_spectral_function(da, [](double l) { return std::exp(l); }, z);
    CHECK((lin - sep).norm() <= 1e-10 * std::max(1.0, sep.norm()));
  }
  CHECK_THROWS_AS(apply_spectral_function(d, [](double l) { return l; }, Vector::Ones(3)), Error);
}

TEST_CASE("operator_norm") {
  CHECK(operator_norm(Matrix::Zero(3, 3)) == 0.0);
  Matrix d(2, 2);
  d << -3, 0, 0, 2;
  CHECK(operator_norm(d) == doctest::Approx(3.0));
  Matrix n(2, 2);
  n << 0, 1, 0, 0;
  CHECK(operator_norm(n) == doctest::Approx(1.0));
  CHECK_THROWS_AS(operator_norm(Matrix(2, 3)), Error);

  Rng rng = make_rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const Matrix a = test::random_matrix(5, 5, rng);
    CHECK(std::abs(operator_norm(a) - operator_norm(a.transpose())) <= 1e-12 * std::max(1.0, operator_norm(a)));
  }
}
