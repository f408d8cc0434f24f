#pragma once

#include "cdnn/covariance.hpp"
#include "cdnn/spectral.hpp"

namespace cdnn {

/// Largest |beta| * ||C|| accepted before exp(-beta lambda) risks overflow.
inline constexpr double kMaxBetaNormProduct = 700.0;

/// rho(C) = exp(-beta C) / tr exp(-beta C), held spectrally: the basis of C
/// plus density eigenvalues rho_i = exp(-beta lambda_i) / Z aligned with it.
/// Never materializes exp(-beta C) unless dense() is called.
class DensityOperator {
 public:
  DensityOperator(double beta, SpectralDecomposition basis);

  double beta() const noexcept { return beta_; }
  Eigen::Index dim() const noexcept { return basis_.dim(); }
  const SpectralDecomposition& basis() const noexcept { return basis_; }
  const Vector& source_spectrum() const noexcept { return basis_.eigenvalues(); }
  const Vector& density_eigenvalues() const noexcept { return density_eigenvalues_; }
  double partition_function() const noexcept { return partition_function_; }
  double log_partition_function() const noexcept { return log_partition_function_; }
  /// ln rho_i, computed without forming rho_i (finite even when rho_i underflows).
  const Vector& log_density_eigenvalues() const noexcept { return log_density_eigenvalues_; }
  /// E_q[lambda] = sum_i rho_i lambda_i.
  double mean_energy() const noexcept { return mean_energy_; }

  /// rho^k x.
  Vector apply_power(int k, const Vector& x) const;
  Vector apply(const Vector& x) const { return apply_power(1, x); }
  Matrix dense() const { return basis_.compose(density_eigenvalues_); }

 private:
  double beta_;
  SpectralDecomposition basis_;
  Vector density_eigenvalues_;
  Vector log_density_eigenvalues_;
  double partition_function_;
  double log_partition_function_;
  double mean_energy_;
};

/// Throws Error{overflow} naming the product when |beta| * norm > 700.
void check_overflow_guard(double beta, double norm);

DensityOperator density_operator(const CovarianceMatrix& c, double beta);
/// Works for any symmetric source, PSD or not.
DensityOperator density_operator(const SpectralDecomposition& basis, double beta);

/// Z = sum_i exp(-beta lambda_i).
double partition_function(const CovarianceMatrix& c, double beta);
double partition_function(const Vector& spectrum, double beta);

/// Perturbation amplification term: 1 for beta >= 0, otherwise
/// e^{|b| n0} (e^{|b| a} - 1) / (|b| a) with a = n1 - n0.
double f_factor(double beta, double norm_c, double norm_c_plus_dc);

struct DensityBoundTerms {
  double bound = 0.0;
  double f_factor = 1.0;
  double partition = 0.0;            ///< Z of C
  double perturbed_partition = 0.0;  ///< Z' of C + dC
  double ratio = 1.0;                ///< R = Z' / Z
  double norm_c = 0.0;
  double norm_dc = 0.0;
  double actual_error = 0.0;         ///< ||rho(C + dC) - rho(C)||
};

/// Evaluates the operator-norm perturbation bound
///   (|b| ||dC|| F / R) (1 + m e^{1[b<0] |b| ||C||})
/// with R measured as Z'/Z, together with the actual error it should dominate.
DensityBoundTerms density_bound_terms(const Matrix& c, const Matrix& dc, double beta);
double density_error_bound(const Matrix& c, const Matrix& dc, double beta);

}  // namespace cdnn
