#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cdnn/covariance.hpp"
#include "cdnn/error.hpp"
#include "support.hpp"

using namespace cdnn;
using test::max_abs;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::invalid_argument;
}

Matrix diag(std::initializer_list<double> v) {
  Vector d(static_cast<Eigen::Index>(v.size()));
  std::copy(v.begin(), v.end(), d.data());
  return d.asDiagonal();
}

}  // namespace

TEST_CASE("DataMatrix rejects non-finite entries") {
  Matrix m = Matrix::Zero(2, 2);
  m(1, 1) = INFINITY;
  CHECK(code_of([&] { DataMatrix d(m); }) == ErrorCode::non_finite);
}

TEST_CASE("CovarianceMatrix validation") {
  CHECK(code_of([] { CovarianceMatrix c(Matrix(2, 3)); }) == ErrorCode::shape);
  Matrix asym(2, 2);
  asym << 1, 1, 0, 1;
  CHECK(code_of([&] { CovarianceMatrix c(asym); }) == ErrorCode::symmetry);
  CHECK_THROWS_AS(CovarianceMatrix(diag({1, -1})), Error);
  CovarianceMatrix c(diag({1, 0}));
  CHECK(c.regularization() == Regularization::raw);
}

TEST_CASE("sample_covariance examples") {
  Matrix same(2, 3);
  same << 1, 2, 3, 1, 2, 3;
  CHECK(max_abs(sample_covariance(DataMatrix(same)).matrix()) == 0.0);

  Matrix rows(2, 2);
  rows << 0, 0, 2, 0;
  Matrix expect(2, 2);
  expect << 1, 0, 0, 0;
  const auto c = sample_covariance(DataMatrix(rows));
  CHECK(max_abs(c.matrix() - expect) < 1e-15);
  CHECK(c.regularization() == Regularization::raw);

  Rng rng = make_rng(4);
  const Matrix x = test::random_matrix(30, 5, rng);
  Matrix shifted = x;
  shifted.rowwise() += test::random_vector(5, rng).transpose() * 10.0;
  CHECK(max_abs(sample_covariance(DataMatrix(x)).matrix() -
                sample_covariance(DataMatrix(shifted)).matrix()) < 1e-11);

  CHECK(code_of([] { sample_covariance(DataMatrix(Matrix::Ones(1, 3))); }) ==
        ErrorCode::insufficient_data);
}

TEST_CASE("sample_covariance is PSD") {
  Rng rng = make_rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const auto c = test::random_covariance(6, 3 + trial % 10, rng);
    CHECK(eigh(c.matrix()).min_eigenvalue() >= -1e-10 * std::max(1.0, operator_norm(c.matrix())));
  }
}

TEST_CASE("shift_regularize examples") {
  const auto a = shift_regularize(CovarianceMatrix(diag({2, 0, 0})));
  CHECK(max_abs(a.matrix() - diag({2, 0, 0})) < 1e-14);
  CHECK(a.min_eig_shift() == doctest::Approx(0.0));
  CHECK(a.regularization() == Regularization::shifted_min_eig_zero);

  const auto b = shift_regularize(CovarianceMatrix(diag({3, 1})));
  CHECK(max_abs(b.matrix() - diag({2, 0})) < 1e-14);
  CHECK(b.min_eig_shift() == doctest::Approx(1.0));

  const auto c = shift_regularize(CovarianceMatrix(Matrix::Identity(4, 4)));
  CHECK(max_abs(c.matrix()) < 1e-14);
  CHECK(c.min_eig_shift() == doctest::Approx(1.0));
}

TEST_CASE("shift_regularize preserves eigenvectors") {
  Rng rng = make_rng(6);
  for (int trial = 0; trial < 100; ++trial) {
    const auto c = test::random_covariance(5, 20, rng);
    const auto s = shift_regularize(c);
    const auto before = eigh(c.matrix());
    const auto after = eigh(s.matrix());
    const Vector shifted = before.eigenvalues().array() - s.min_eig_shift();
    CHECK(max_abs(after.eigenvalues() - shifted) <= 1e-9);
    CHECK(max_abs(after.eigenvectors() - before.eigenvectors()) <= 1e-9);
  }
}

TEST_CASE("trace_normalize examples") {
  CHECK(max_abs(trace_normalize(CovarianceMatrix(Matrix::Identity(2, 2))).matrix() - diag({0.5, 0.5})) <
        1e-15);
  const auto t = trace_normalize(CovarianceMatrix(diag({2, 0, 0})));
  CHECK(max_abs(t.matrix() - diag({1, 0, 0})) < 1e-15);
  CHECK(t.regularization() == Regularization::trace_normalized);
  CHECK(code_of([] { trace_normalize(CovarianceMatrix(Matrix::Zero(3, 3))); }) ==
        ErrorCode::degenerate_covariance);
}

TEST_CASE("regularizers commute with permutation conjugation") {
  Rng rng = make_rng(7);
  for (int dim = 2; dim <= 4; ++dim) {
    const auto c = test::random_covariance(dim, 12, rng);
    std::vector<int> perm(static_cast<std::size_t>(dim));
    std::iota(perm.begin(), perm.end(), 0);
    do {
      Matrix t = Matrix::Zero(dim, dim);
      for (int i = 0; i < dim; ++i) t(perm[static_cast<std::size_t>(i)], i) = 1.0;
      const CovarianceMatrix conj(t.transpose() * c.matrix() * t);
      CHECK(max_abs(trace_normalize(conj).matrix() -
                    t.transpose() * trace_normalize(c).matrix() * t) < 1e-12);
      CHECK(max_abs(shift_regularize(conj).matrix() -
                    t.transpose() * shift_regularize(c).matrix() * t) < 1e-10);
    } while (std::next_permutation(perm.begin(), perm.end()));
  }
}

TEST_CASE("gen_gaussian_data") {
  const auto d = gen_gaussian_data(3, 10000, SpectrumFamily::gaussian, 1);
  CHECK(max_abs(sample_covariance(d).matrix() - Matrix::Identity(3, 3)) <= 0.1);
  const auto again = gen_gaussian_data(3, 10000, SpectrumFamily::gaussian, 1);
  CHECK(d.values() == again.values());

  const auto e = gen_gaussian_data(1, 2, SpectrumFamily::exponential, 9);
  CHECK(e.n_samples() == 2);
  CHECK(e.dim() == 1);
  CHECK((e.values().array() > 0.0).all());

  const auto g = gen_gaussian_data(2, 20000, SpectrumFamily::gamma, 3);
  CHECK((g.values().array() > 0.0).all());
  CHECK(g.values().mean() == doctest::Approx(2.0).epsilon(0.03));

  CHECK(parse_spectrum_family("gamma") == SpectrumFamily::gamma);
  CHECK(code_of([] { parse_spectrum_family("cauchy"); }) == ErrorCode::unknown_family);
}

TEST_CASE("erdos_renyi_laplacian") {
  Rng rng = make_rng(8);
  const Matrix l = erdos_renyi_laplacian(8, 0.5, rng);
  CHECK(max_abs(l - l.transpose()) == 0.0);
  CHECK(max_abs(l * Vector::Ones(8)) < 1e-12);
  const auto d = eigh(l);
  CHECK(std::abs(d.eigenvalues()(0)) < 1e-10);
  CHECK(d.eigenvalues()(1) > 1e-8);  // connected
  CHECK_THROWS_AS(erdos_renyi_laplacian(8, 0.0, rng), Error);
}

TEST_CASE("gen_graph_stationary") {
  const std::vector<double> identity{1.0};
  const auto w = gen_graph_stationary(6, 20000, 0.5, identity, 2);
  CHECK(max_abs(sample_covariance(w.data).matrix() - Matrix::Identity(6, 6)) <= 0.1);

  const std::vector<double> a{1.0, 0.5};
  const auto s = gen_graph_stationary(8, 20000, 0.5, a, 7);
  const auto lap = eigh(s.laplacian);
  const Vector g = (1.0 + 0.5 * lap.eigenvalues().array()).square();
  // population covariance g(L)^2 shares L's eigenvectors
  const Matrix pop = lap.compose(g);
  CHECK(max_abs(pop * s.laplacian - s.laplacian * pop) < 1e-9);
  const auto emp = eigh(sample_covariance(s.data).matrix());
  double mean_alignment = 0.0;
  for (Eigen::Index i = 0; i < 8; ++i) {
    mean_alignment += std::abs(emp.eigenvectors().col(i).dot(lap.eigenvectors().col(i)));
  }
  CHECK(mean_alignment / 8.0 >= 0.9);

  const auto again = gen_graph_stationary(8, 20000, 0.5, a, 7);
  CHECK(again.data.values() == s.data.values());
}

TEST_CASE("gen_ar_process") {
  const auto iid = gen_ar_process(2, 20000, 0.0, 1, 0.0);
  CHECK(max_abs(sample_covariance(iid).matrix() - Matrix::Identity(2, 2)) <= 0.05);

  const auto ar = gen_ar_process(3, 50000, 0.9, 2);
  const Matrix& x = ar.values();
  for (Eigen::Index j = 0; j < 3; ++j) {
    const Vector col = x.col(j).array() - x.col(j).mean();
    const double lag = col.head(col.size() - 1).dot(col.tail(col.size() - 1));
    CHECK(lag / col.squaredNorm() == doctest::Approx(0.9).epsilon(0.05 / 0.9));
  }
  CHECK(gen_ar_process(3, 100, 0.5, 4).values() == gen_ar_process(3, 100, 0.5, 4).values());
  CHECK(code_of([] { gen_ar_process(3, 100, 1.0, 4); }) == ErrorCode::nonstationary);
  CHECK(code_of([] { gen_ar_process(3, 100, -1.2, 4); }) == ErrorCode::nonstationary);
}

TEST_CASE("read_data_csv") {
  std::istringstream ok("a,b\n1,2\n3,4.5\n");
  const auto d = read_data_csv(ok, true);
  CHECK(d.n_samples() == 2);
  CHECK(d.values()(1, 1) == 4.5);

  std::istringstream no_header("1,2\n3,4\n");
  CHECK(read_data_csv(no_header, false).n_samples() == 2);

  std::istringstream ragged("1,2\n3\n");
  CHECK(code_of([&] { read_data_csv(ragged, false); }) == ErrorCode::parse);
  std::istringstream junk("1,x\n");
  CHECK(code_of([&] { read_data_csv(junk, false); }) == ErrorCode::parse);
  std::istringstream empty("");
  CHECK(code_of([&] { read_data_csv(empty, false); }) == ErrorCode::parse);
  CHECK(code_of([] { read_data_csv(std::string("/nonexistent/file.csv"), false); }) == ErrorCode::io);
}
