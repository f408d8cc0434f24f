#include "cdnn/spectral.hpp"

#include <cmath>
#include <string>

#include "cdnn/error.hpp"

namespace cdnn {
namespace {

// Entries below this magnitude are skipped when fixing eigenvector signs.
constexpr double kSignThreshold = 1e-8;

void fix_signs(Matrix& vectors) {
  for (Eigen::Index j = 0; j < vectors.cols(); ++j) {
    for (Eigen::Index i = 0; i < vectors.rows(); ++i) {
      const double v = vectors(i, j);
      if (std::abs(v) > kSignThreshold) {
        if (v < 0.0) vectors.col(j) *= -1.0;
        break;
      }
    }
  }
}

}  // namespace

SpectralDecomposition::SpectralDecomposition(Vector eigenvalues, Matrix eigenvectors)
    : eigenvalues_(std::move(eigenvalues)), eigenvectors_(std::move(eigenvectors)) {
  if (eigenvectors_.rows() != eigenvectors_.cols() ||
      eigenvectors_.cols() != eigenvalues_.size() || eigenvalues_.size() == 0) {
    throw Error(ErrorCode::shape, "SpectralDecomposition: inconsistent shapes");
  }
}

double SpectralDecomposition::spectral_radius() const {
  return std::max(std::abs(min_eigenvalue()), std::abs(max_eigenvalue()));
}

Matrix SpectralDecomposition::compose(const Vector& values) const {
  if (values.size() != dim()) {
    throw Error(ErrorCode::dimension_mismatch, "compose: expected " +
                                                   std::to_string(dim()) + " values, got " +
                                                   std::to_string(values.size()));
  }
  return eigenvectors_ * values.asDiagonal() * eigenvectors_.transpose();
}

Matrix symmetrized(const Matrix& m) {
  if (m.rows() != m.cols() || m.rows() == 0) {
    throw Error(ErrorCode::shape, "expected a non-empty square matrix, got " +
                                      std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
  }
  if (!m.allFinite()) throw Error(ErrorCode::non_finite, "matrix has non-finite entries");
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (asym > kSymmetryTolerance * scale) {
    throw Error(ErrorCode::symmetry,
                "matrix is not symmetric: max|M - M^T| = " + std::to_string(asym));
  }
  return 0.5 * (m + m.transpose());
}

SpectralDecomposition eigh(const Matrix& m) {
  const Matrix sym = symmetrized(m);
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorCode::non_finite, "eigh: eigensolver did not converge");
  }
  Matrix vectors = solver.eigenvectors();
  fix_signs(vectors);
  return SpectralDecomposition(solver.eigenvalues(), std::move(vectors));
}

Vector apply_spectral_function(const SpectralDecomposition& d,
                               const std::function<double(double)>& f,
                               const Vector& x) {
  if (x.size() != d.dim()) {
    throw Error(ErrorCode::dimension_mismatch,
                "apply_spectral_function: vector has length " + std::to_string(x.size()) +
                    ", expected " + std::to_string(d.dim()));
  }
  Vector coords = d.eigenvectors().transpose() * x;
  for (Eigen::Index i = 0; i < coords.size(); ++i) coords(i) *= f(d.eigenvalues()(i));
  return d.eigenvectors() * coords;
}

double operator_norm(const Matrix& m) {
  if (m.rows() != m.cols()) {
    throw Error(ErrorCode::shape, "operator_norm: matrix is not square");
  }
  if (m.size() == 0) return 0.0;
  if (m == m.transpose()) {
    Eigen::SelfAdjointEigenSolver<Matrix> solver(m, Eigen::EigenvaluesOnly);
    return solver.eigenvalues().cwiseAbs().maxCoeff();
  }
  Eigen::JacobiSVD<Matrix> svd(m);
  return svd.singularValues()(0);
}

}  // namespace cdnn
