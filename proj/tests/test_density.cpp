#include <doctest.h>

#include <cmath>

#include "cdnn/density.hpp"
#include "cdnn/error.hpp"
#include "support.hpp"

using namespace cdnn;
using test::max_abs;

namespace {

CovarianceMatrix diag(std::initializer_list<double> v) {
  Vector d(static_cast<Eigen::Index>(v.size()));
  std::copy(v.begin(), v.end(), d.data());
  return CovarianceMatrix(d.asDiagonal().toDenseMatrix());
}

Matrix perturbation(Eigen::Index dim, double norm, Rng& rng) {
  const Matrix e = test::random_symmetric(dim, rng);
  return e * (norm / operator_norm(e));
}

}  // namespace

TEST_CASE("beta = 0 gives the uniform density") {
  Rng rng = make_rng(1);
  const auto c = test::random_covariance(5, 10, rng);
  const auto rho = density_operator(c, 0.0);
  CHECK(max_abs(rho.density_eigenvalues() - Vector::Constant(5, 0.2)) < 1e-15);
  CHECK(rho.partition_function() == doctest::Approx(5.0));
  CHECK(partition_function(c, 0.0) == doctest::Approx(5.0));
}

TEST_CASE("diag(2,0,0) at beta = 1") {
  const auto rho = density_operator(diag({2, 0, 0}), 1.0);
  // ascending source spectrum (0, 0, 2)
  CHECK(rho.density_eigenvalues()(0) == doctest::Approx(0.46831053).epsilon(1e-8));
  CHECK(rho.density_eigenvalues()(1) == doctest::Approx(0.46831053).epsilon(1e-8));
  CHECK(rho.density_eigenvalues()(2) == doctest::Approx(0.06337894).epsilon(1e-7));
  CHECK(rho.partition_function() == doctest::Approx(2.135335283236613).epsilon(1e-14));
  CHECK(partition_function(diag({2, 0, 0}), 1.0) == doctest::Approx(2.135335283236613).epsilon(1e-14));
  CHECK(rho.log_partition_function() == doctest::Approx(std::log(2.135335283236613)));
  Matrix expect = Matrix::Zero(3, 3);
  expect(0, 0) = std::exp(-2.0) / 2.135335283236613;
  expect(1, 1) = expect(2, 2) = 1.0 / 2.135335283236613;
  CHECK(max_abs(rho.dense() - expect) < 1e-14);
}

TEST_CASE("scaled identity gives the uniform density for any beta") {
  for (double beta : {-3.0, 0.5, 40.0}) {
    const auto rho = density_operator(CovarianceMatrix(7.0 * Matrix::Identity(4, 4)), beta);
    CHECK(max_abs(rho.density_eigenvalues() - Vector::Constant(4, 0.25)) < 1e-15);
  }
}

TEST_CASE("overflow guard") {
  const auto c = diag({10, 0});
  CHECK_NOTHROW(density_operator(c, 70.0));
  try {
    density_operator(c, 70.5);
    FAIL("guard not triggered");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::overflow);
    CHECK(std::string(e.what()).find("705") != std::string::npos);
  }
  CHECK_THROWS_AS(density_operator(c, -71.0), Error);
  CHECK_THROWS_AS(partition_function(c, 71.0), Error);
}

TEST_CASE("underflowing eigenvalues keep finite logs") {
  const auto rho = density_operator(diag({10, 0}), 69.0);
  CHECK(std::isfinite(rho.log_density_eigenvalues()(1)));
  CHECK(rho.log_density_eigenvalues()(1) == doctest::Approx(-690.0).epsilon(1e-12));
}

TEST_CASE("invariants over random inputs") {
  Rng rng = make_rng(2);
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Index dim = 2 + trial % 9;
    const auto c = trial % 3 == 0 ? test::rank_one(dim, rng) : test::random_covariance(dim, dim + 3, rng);
    for (double beta : {-5.0, -1.0, -0.1, 0.0, 0.1, 1.0, 5.0, 15.0}) {
      if (std::abs(beta) * operator_norm(c.matrix()) > kMaxBetaNormProduct) continue;
      const auto rho = density_operator(c, beta);
      const Vector& r = rho.density_eigenvalues();
      REQUIRE(std::abs(r.sum() - 1.0) <= 1e-12);
      REQUIRE(r.minCoeff() > 0.0);
      REQUIRE(rho.log_density_eigenvalues().sum() > -INFINITY);  // det rho > 0
      REQUIRE(std::abs(partition_function(c, beta) / rho.partition_function() - 1.0) <= 1e-12);
      const Vector& l = rho.source_spectrum();
      for (Eigen::Index i = 1; i < dim; ++i) {
        if (l(i) - l(i - 1) <= 1e-9) continue;
        if (beta > 0) REQUIRE(r(i) < r(i - 1));
        if (beta < 0) REQUIRE(r(i) > r(i - 1));
      }
    }
  }
}

TEST_CASE("shift-regularized source has Z >= 1 for beta > 0") {
  Rng rng = make_rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto c = shift_regularize(test::random_covariance(6, 12, rng));
    for (double beta : {0.1, 1.0, 5.0}) CHECK(partition_function(c, beta) >= 1.0);
  }
}

TEST_CASE("apply_power matches dense powers") {
  Rng rng = make_rng(4);
  const auto c = test::random_covariance(5, 9, rng);
  const auto rho = density_operator(c, 0.7);
  const Vector x = test::random_vector(5, rng);
  const Matrix d = rho.dense();
  CHECK((rho.apply_power(0, x) - x).norm() < 1e-14);
  CHECK((rho.apply(x) - d * x).norm() < 1e-13);
  CHECK((rho.apply_power(3, x) - d * d * d * x).norm() < 1e-13);
  CHECK(rho.mean_energy() == doctest::Approx(rho.density_eigenvalues().dot(rho.source_spectrum())));
}

TEST_CASE("f_factor") {
  CHECK(f_factor(2.0, 1.0, 1.5) == 1.0);
  CHECK(f_factor(0.0, 3.0, 1.0) == 1.0);
  CHECK(std::abs(f_factor(-1e-9, 1.0, 1.5) - 1.0) <= 1e-6);
  CHECK(f_factor(-1.0, 1.0, 1.5) == doctest::Approx(3.5268144837580393).epsilon(1e-13));
  // a = 0 series limit
  CHECK(f_factor(-2.0, 1.0, 1.0) == doctest::Approx(std::exp(2.0)).epsilon(1e-12));
  for (double beta : {-1e-6, -1e-7, 1e-7}) {
    CHECK(std::abs(f_factor(beta, 2.0, 3.0) - 1.0) <= 1e-4);
  }
  CHECK(f_factor(-0.5, 2.0, 1.0) > 0.0);  // shrinking perturbation
}

TEST_CASE("density_error_bound examples") {
  Rng rng = make_rng(5);
  const auto c = test::random_covariance(4, 10, rng);
  const auto zero = density_bound_terms(c.matrix(), Matrix::Zero(4, 4), 1.0);
  CHECK(zero.bound == 0.0);
  CHECK(zero.actual_error < 1e-15);

  const Matrix dc = perturbation(4, 0.3, rng);
  const auto flat = density_bound_terms(c.matrix(), dc, 0.0);
  CHECK(flat.bound == 0.0);
  CHECK(flat.actual_error <= 1e-15);  // both densities are I/m; only basis roundoff remains
  CHECK(density_operator(CovarianceMatrix(c.matrix() + dc), 0.0).density_eigenvalues() ==
        density_operator(c, 0.0).density_eigenvalues());

  const auto s = shift_regularize(test::random_covariance(8, 16, rng));
  const Matrix d8 = perturbation(8, 0.1, rng);
  const auto t = density_bound_terms(s.matrix(), d8, 1.0);
  CHECK(t.norm_dc == doctest::Approx(0.1));
  CHECK(t.ratio == doctest::Approx(t.perturbed_partition / t.partition));
  CHECK(t.bound >= t.actual_error);
  CHECK(density_error_bound(s.matrix(), d8, 1.0) == doctest::Approx(t.bound));
  CHECK_THROWS_AS(density_bound_terms(s.matrix(), Matrix::Zero(3, 3), 1.0), Error);
}

TEST_CASE("bound dominance for positive beta") {
  Rng rng = make_rng(6);
  std::uniform_real_distribution<double> beta_dist(0.05, 5.0), level(0.01, 0.5);
  int holds = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto c = shift_regularize(test::random_covariance(2 + trial % 10, 20, rng));
    const Matrix dc = perturbation(c.dim(), level(rng), rng);
    const auto t = density_bound_terms(c.matrix(), dc, beta_dist(rng));
    if (t.bound >= t.actual_error) ++holds;
  }
  CHECK(holds >= 990);
}
