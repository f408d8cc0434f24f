#pragma once

#include <functional>

#include <Eigen/Dense>

namespace cdnn {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Relative asymmetry accepted (and symmetrized away) by eigh.
inline constexpr double kSymmetryTolerance = 1e-10;

/// Orthonormal eigenbasis plus ascending eigenvalues of a symmetric matrix.
///
/// Column i of eigenvectors() pairs with eigenvalues()(i). Each column has its
/// first non-negligible entry positive, so the basis is reproducible for a
/// fixed input. Instances are immutable.
class SpectralDecomposition {
 public:
  SpectralDecomposition(Vector eigenvalues, Matrix eigenvectors);

  Eigen::Index dim() const noexcept { return eigenvalues_.size(); }
  const Vector& eigenvalues() const noexcept { return eigenvalues_; }
  const Matrix& eigenvectors() const noexcept { return eigenvectors_; }

  double min_eigenvalue() const { return eigenvalues_(0); }
  double max_eigenvalue() const { return eigenvalues_(dim() - 1); }
  /// max |lambda_i|, the operator norm of the source matrix.
  double spectral_radius() const;

  /// V diag(values) V^T.
  Matrix compose(const Vector& values) const;
  /// V Lambda V^T.
  Matrix reconstruct() const { return compose(eigenvalues_); }

 private:
  Vector eigenvalues_;
  Matrix eigenvectors_;
};

/// Throws Error{shape|symmetry} unless m is square and symmetric within
/// kSymmetryTolerance * max(1, max|m_ij|); returns (m + m^T) / 2.
Matrix symmetrized(const Matrix& m);

SpectralDecomposition eigh(const Matrix& m);

/// V f(Lambda) V^T x.
Vector apply_spectral_function(const SpectralDecomposition& d,
                               const std::function<double(double)>& f,
                               const Vector& x);

/// Largest singular value.
double operator_norm(const Matrix& m);

}  // namespace cdnn
