#pragma once

#include <cmath>
#include <random>

#include "cdnn/covariance.hpp"
#include "cdnn/random.hpp"

namespace cdnn::test {

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

inline Vector random_vector(Eigen::Index n, Rng& rng) { return random_matrix(n, 1, rng).col(0); }

inline Matrix random_symmetric(Eigen::Index n, Rng& rng) {
  const Matrix a = random_matrix(n, n, rng);
  return (a + a.transpose()) / 2.0;
}

// Sample covariance of `rows` Gaussian observations with per-column scales in
// [0.2, 2]; rank-deficient when rows <= dim.
inline CovarianceMatrix random_covariance(Eigen::Index dim, Eigen::Index rows, Rng& rng) {
  std::uniform_real_distribution<double> scale(0.2, 2.0);
  Matrix x = random_matrix(rows, dim, rng);
  for (Eigen::Index j = 0; j < dim; ++j) x.col(j) *= scale(rng);
  return sample_covariance(DataMatrix(std::move(x)));
}

inline CovarianceMatrix rank_one(Eigen::Index dim, Rng& rng) {
  const Vector v = random_vector(dim, rng);
  return CovarianceMatrix(v * v.transpose());
}

inline double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace cdnn::test
