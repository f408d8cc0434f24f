#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cdnn/error.hpp"
#include "cdnn/filter.hpp"
#include "support.hpp"

using namespace cdnn;
using test::max_abs;

namespace {

double rel(const Vector& a, const Vector& b) { return (a - b).norm() / std::max(1.0, b.norm()); }

FilterSpec random_filter(int order, double beta, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  FilterSpec f;
  f.beta = beta;
  for (int k = 0; k <= order; ++k) f.coeffs.push_back(normal(rng));
  return f;
}

Permutation random_permutation(std::size_t n, Rng& rng) {
  Permutation p(n);
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

}  // namespace

TEST_CASE("FilterSpec validation") {
  CHECK_THROWS_AS(FilterSpec{}.validate(), Error);
  CHECK_THROWS_AS((FilterSpec{{1.0, NAN}, 1.0}.validate()), Error);
  CHECK_THROWS_AS((FilterSpec{{1.0}, INFINITY}.validate()), Error);
  CHECK_NOTHROW((FilterSpec{{1.0, 2.0}, -1.0}.validate()));
  CHECK(FilterSpec{{1.0, 2.0, 3.0}, 1.0}.order() == 2);
}

TEST_CASE("filter_apply examples") {
  Rng rng = make_rng(1);
  const auto c = test::random_covariance(3, 8, rng);
  const auto rho = density_operator(c, 1.0);
  const Vector x = test::random_vector(3, rng);

  CHECK(rel(filter_apply({{1.0}, 1.0}, rho, x), x) < 1e-14);
  CHECK(rel(filter_apply({{0.0, 1.0}, 1.0}, rho, x), rho.dense() * x) < 1e-13);
  CHECK(rel(filter_apply({{1.0, 2.0}, 1.0}, rho, x), x + 2.0 * rho.dense() * x) < 1e-13);

  FilterSpec skip{{5.0, 2.0}, 1.0, true};
  CHECK(rel(filter_apply(skip, rho, x), 2.0 * rho.dense() * x) < 1e-13);

  CHECK_THROWS_AS(filter_apply({{1.0}, 1.0}, rho, Vector::Ones(4)), Error);
  CHECK_THROWS_AS(filter_apply({{1.0}, 2.0}, rho, x), Error);  // beta mismatch
}

TEST_CASE("spectral path matches dense polynomial") {
  Rng rng = make_rng(2);
  std::uniform_real_distribution<double> beta_dist(-2.0, 2.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Eigen::Index dim = 1 + trial % 16;
    const auto c = test::random_covariance(dim, dim + 2, rng);
    auto f = random_filter(trial % 6, beta_dist(rng), rng);
    f.skip_k0 = trial % 4 == 0;
    const auto rho = density_operator(c, f.beta);
    const Vector x = test::random_vector(dim, rng);
    REQUIRE(rel(filter_apply(f, rho, x), filter_apply_dense(f, rho, x)) <= 1e-9);
    // linear in x
    const Vector y = test::random_vector(dim, rng);
    REQUIRE(rel(filter_apply(f, rho, 3.0 * x - y), 3.0 * filter_apply(f, rho, x) - filter_apply(f, rho, y)) <=
            1e-12);
  }
}

TEST_CASE("beta = 0 collapses to a scalar multiple") {
  Rng rng = make_rng(3);
  const auto c = test::random_covariance(4, 10, rng);
  const FilterSpec f{{0.5, 2.0, -1.0}, 0.0};
  const Vector x = test::random_vector(4, rng);
  const double scale = 0.5 + 2.0 / 4.0 - 1.0 / 16.0;
  CHECK(rel(filter_apply(f, density_operator(c, 0.0), x), scale * x) < 1e-14);
}

TEST_CASE("frequency_response") {
  const FilterSpec id{{0.0, 1.0}, 1.0};
  CHECK(frequency_response(id, 2.0, 2.135335283236613) == doctest::Approx(0.06337893833303762).epsilon(1e-14));
  const double z = 0.3;
  CHECK(frequency_response(id, -std::log(z), z) == doctest::Approx(1.0));
  CHECK(frequency_response({{2.0, 3.0}, 0.0}, 17.0, 5.0) == doctest::Approx(2.0 + 3.0 / 5.0));

  Rng rng = make_rng(4);
  const auto c = test::random_covariance(5, 9, rng);
  const FilterSpec f{{0.2, -1.0, 0.7}, 0.8};
  const auto rho = density_operator(c, f.beta);
  const Vector x = test::random_vector(5, rng);
  const Vector coords = vft(rho.basis(), filter_apply(f, rho, x));
  const Vector input = vft(rho.basis(), x);
  for (Eigen::Index i = 0; i < 5; ++i) {
    CHECK(coords(i) == doctest::Approx(frequency_response(f, rho.source_spectrum()(i), rho.partition_function()) *
                                       input(i)));
  }
}

TEST_CASE("lipschitz_alpha and theta") {
  CHECK(lipschitz_alpha({{1.0}, 7.0}) == 0.0);
  CHECK(lipschitz_alpha({{0.0, 1.0}, 2.0}) == 2.0);
  CHECK(lipschitz_alpha({{1.0, 2.0, 3.0}, 0.5}) == doctest::Approx(4.0));
  CHECK(lipschitz_alpha({{1.0, 2.0, 3.0}, 0.5, true}) == doctest::Approx(4.0));
  CHECK(lipschitz_alpha({{1.0, -2.0}, -3.0}) == doctest::Approx(6.0));

  Vector s(2);
  s << 1, 3;
  CHECK(integral_lipschitz_theta({{1.0}, 1.0}, s) == 0.0);
  CHECK(integral_lipschitz_theta({{0.0, 1.0}, 2.0}, s) == doctest::Approx(6.0));
  CHECK(integral_lipschitz_theta({{0.0, 1.0}, 2.0}, Vector::Zero(4)) == 0.0);
  CHECK_THROWS_AS(integral_lipschitz_theta({{0.0, 1.0}, 2.0}, Vector()), Error);
}

TEST_CASE("composite Lipschitz bound") {
  Rng rng = make_rng(5);
  std::uniform_real_distribution<double> lam(0.0, 10.0), beta_dist(-5.0, 5.0);
  std::uniform_int_distribution<int> order(0, 5);
  for (int trial = 0; trial < 10000; ++trial) {
    const FilterSpec f = random_filter(order(rng), beta_dist(rng), rng);
    const double l1 = lam(rng), l2 = lam(rng);
    Vector spectrum(4);
    spectrum << l1, l2, lam(rng), lam(rng);
    const double z = partition_function(spectrum, f.beta);
    const double diff = std::abs(frequency_response(f, l2, z) - frequency_response(f, l1, z));
    REQUIRE(diff <= lipschitz_alpha(f) * std::abs(l2 - l1) + 1e-12);
  }
}

TEST_CASE("vft") {
  const auto id = eigh(Matrix::Identity(3, 3));
  Vector x(3);
  x << 1, -2, 3;
  CHECK(vft(id, x) == x);

  Rng rng = make_rng(6);
  const auto d = eigh(test::random_symmetric(6, rng));
  for (int trial = 0; trial < 20; ++trial) {
    const Vector y = test::random_vector(6, rng);
    const Vector t = vft(d, y);
    CHECK(t.norm() == doctest::Approx(y.norm()).epsilon(1e-12));
    CHECK((inverse_vft(d, t) - y).norm() <= 1e-10);
  }
  for (Eigen::Index i = 0; i < 6; ++i) {
    CHECK((vft(d, d.eigenvectors().col(i)) - Vector::Unit(6, i)).norm() < 1e-12);
  }
  CHECK_THROWS_AS(vft(d, Vector::Ones(5)), Error);
}

TEST_CASE("permutations") {
  const Permutation p{2, 0, 1};
  const Matrix t = permutation_matrix(p);
  Vector x(3);
  x << 10, 20, 30;
  const Vector y = t.transpose() * x;
  CHECK(y(0) == 30);
  CHECK(y(1) == 10);
  CHECK(y(2) == 20);
  CHECK_THROWS_AS(validate_permutation({0, 0, 1}, 3), Error);
  CHECK_THROWS_AS(validate_permutation({0, 1}, 3), Error);
  CHECK_THROWS_AS(validate_permutation({0, 1, 3}, 3), Error);
  try {
    validate_permutation({1, 1}, 2);
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_permutation);
  }
}

TEST_CASE("permutation equivariance") {
  Rng rng = make_rng(7);
  const FilterSpec f{{0.3, 1.0, -0.5, 0.25}, 1.5};

  const auto c3 = test::random_covariance(3, 10, rng);
  const Vector x3 = test::random_vector(3, rng);
  CHECK(check_permutation_equivariance(f, c3, x3, {0, 1, 2}) <= 1e-12);
  Permutation p{0, 1, 2};
  do {
    CHECK(check_permutation_equivariance(f, c3, x3, p) <= 1e-9);
  } while (std::next_permutation(p.begin(), p.end()));

  const auto r1 = test::rank_one(5, rng);
  const Vector x5 = test::random_vector(5, rng);
  for (int trial = 0; trial < 20; ++trial) {
    CHECK(check_permutation_equivariance(f, r1, x5, random_permutation(5, rng)) <= 1e-9);
  }
  CHECK(check_permutation_equivariance(f, CovarianceMatrix(Matrix::Identity(4, 4)), test::random_vector(4, rng),
                                       {3, 2, 1, 0}) <= 1e-9);
  CHECK_THROWS_AS(check_permutation_equivariance(f, c3, x3, {0, 0, 1}), Error);
}
