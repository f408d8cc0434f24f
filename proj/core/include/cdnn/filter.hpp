#pragma once

#include <cstddef>
#include <vector>

#include "cdnn/covariance.hpp"
#include "cdnn/density.hpp"

namespace cdnn {

/// Polynomial density filter H(rho) = sum_k h_k rho^k at inverse temperature beta.
struct FilterSpec {
  std::vector<double> coeffs;  ///< h_0 .. h_K
  double beta = 0.0;
  bool skip_k0 = false;  ///< drop the unfiltered k = 0 term

  int order() const noexcept { return static_cast<int>(coeffs.size()) - 1; }
  /// Throws invalid_argument for empty or non-finite coefficients / beta.
  void validate() const;
};

/// sum_k h_k r^k over the active taps of f.
double filter_polynomial(const FilterSpec& f, double r);
/// d/dr of filter_polynomial.
double filter_polynomial_derivative(const FilterSpec& f, double r);

/// H(rho) x computed in the eigenbasis of rho. rho.beta() must equal f.beta.
Vector filter_apply(const FilterSpec& f, const DensityOperator& rho, const Vector& x);

/// h(rho(lambda)) = sum_k h_k (e^{-beta lambda} / Z)^k.
///
/// The response depends on Z, i.e. on the whole spectrum of the operating
/// covariance, not on lambda alone.
double frequency_response(const FilterSpec& f, double lambda, double partition);

/// alpha = sum_k |h_k| |beta k|.
double lipschitz_alpha(const FilterSpec& f);

/// theta = alpha * max_{i,j} |lambda_i + lambda_j| / 2, taken over the given
/// finite spectrum.
double integral_lipschitz_theta(const FilterSpec& f, const Vector& spectrum);

/// Covariance Fourier transform U^T x and its inverse U x~.
Vector vft(const SpectralDecomposition& decomposition, const Vector& x);
Vector inverse_vft(const SpectralDecomposition& decomposition, const Vector& coords);

/// perm[i] = j means (T^T x)_i = x_j, i.e. T has a one at (j, i).
using Permutation = std::vector<std::size_t>;

Matrix permutation_matrix(const Permutation& perm);
void validate_permutation(const Permutation& perm, Eigen::Index dim);

/// ||H(rho(T^T C T)) T^T x - T^T H(rho(C)) x||_inf. When C has (nearly)
/// repeated eigenvalues both sides are evaluated with dense matrix powers,
/// since individual eigenvectors are not unique there.
double check_permutation_equivariance(const FilterSpec& f, const CovarianceMatrix& c,
                                      const Vector& x, const Permutation& perm);

/// Dense sum_k h_k rho^k x using explicit matrix powers of rho.dense().
Vector filter_apply_dense(const FilterSpec& f, const DensityOperator& rho, const Vector& x);

}  // namespace cdnn
