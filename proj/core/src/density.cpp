#include "cdnn/density.hpp"

#include <cmath>
#include <sstream>

#include "cdnn/error.hpp"

namespace cdnn {
namespace {

constexpr double kSeriesThreshold = 1e-8;

// Returns (max exponent, sum of exp(a_i - max)) for a_i = -beta lambda_i.
std::pair<double, double> shifted_exp_sum(const Vector& spectrum, double beta) {
  const Vector exponents = -beta * spectrum;
  const double top = exponents.maxCoeff();
  return {top, (exponents.array() - top).exp().sum()};
}

}  // namespace

void check_overflow_guard(double beta, double norm) {
  const double product = std::abs(beta) * norm;
  if (!(product <= kMaxBetaNormProduct)) {
    std::ostringstream msg;
    msg << "|beta| * ||C|| = " << product << " exceeds " << kMaxBetaNormProduct
        << " (beta = " << beta << ", ||C|| = " << norm << ")";
    throw Error(ErrorCode::overflow, msg.str());
  }
}

DensityOperator::DensityOperator(double beta, SpectralDecomposition basis)
    : beta_(beta), basis_(std::move(basis)) {
  if (!std::isfinite(beta_)) throw Error(ErrorCode::non_finite, "beta must be finite");
  check_overflow_guard(beta_, basis_.spectral_radius());
  const Vector& lambda = basis_.eigenvalues();
  const Vector exponents = -beta_ * lambda;
  const double top = exponents.maxCoeff();
  const Vector weights = (exponents.array() - top).exp().matrix();
  const double sum = weights.sum();
  log_partition_function_ = top + std::log(sum);
  partition_function_ = std::exp(log_partition_function_);
  density_eigenvalues_ = weights / sum;
  log_density_eigenvalues_ = (exponents.array() - log_partition_function_).matrix();
  mean_energy_ = density_eigenvalues_.dot(lambda);
}

Vector DensityOperator::apply_power(int k, const Vector& x) const {
  if (x.size() != dim()) {
    throw Error(ErrorCode::dimension_mismatch,
                "DensityOperator::apply: vector length " + std::to_string(x.size()) +
                    " != dim " + std::to_string(dim()));
  }
  if (k < 0) throw Error(ErrorCode::invalid_argument, "apply_power: negative power");
  const Matrix& v = basis_.eigenvectors();
  Vector coords = v.transpose() * x;
  coords.array() *= density_eigenvalues_.array().pow(static_cast<double>(k));
  return v * coords;
}

DensityOperator density_operator(const CovarianceMatrix& c, double beta) {
  return DensityOperator(beta, eigh(c.matrix()));
}

DensityOperator density_operator(const SpectralDecomposition& basis, double beta) {
  return DensityOperator(beta, basis);
}

double partition_function(const Vector& spectrum, double beta) {
  if (spectrum.size() == 0) throw Error(ErrorCode::shape, "partition_function: empty spectrum");
  check_overflow_guard(beta, spectrum.cwiseAbs().maxCoeff());
  const auto [top, sum] = shifted_exp_sum(spectrum, beta);
  return std::exp(top) * sum;
}

double partition_function(const CovarianceMatrix& c, double beta) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(c.matrix(), Eigen::EigenvaluesOnly);
  return partition_function(Vector(solver.eigenvalues()), beta);
}

double f_factor(double beta, double norm_c, double norm_c_plus_dc) {
  if (beta >= 0.0) return 1.0;
  const double b = std::abs(beta);
  const double a = norm_c_plus_dc - norm_c;
  const double lead = std::exp(b * norm_c);
  const double x = b * a;
  if (std::abs(x) < kSeriesThreshold) return lead;
  return lead * std::expm1(x) / x;
}

DensityBoundTerms density_bound_terms(const Matrix& c, const Matrix& dc, double beta) {
  if (c.rows() != dc.rows() || c.cols() != dc.cols()) {
    throw Error(ErrorCode::dimension_mismatch, "density_error_bound: C and dC differ in shape");
  }
  const SpectralDecomposition base = eigh(c);
  const SpectralDecomposition perturbed = eigh(c + dc);
  const DensityOperator rho(beta, base);
  const DensityOperator rho_p(beta, perturbed);

  DensityBoundTerms t;
  t.norm_c = base.spectral_radius();
  t.norm_dc = operator_norm(symmetrized(dc));
  t.f_factor = f_factor(beta, t.norm_c, perturbed.spectral_radius());
  t.partition = rho.partition_function();
  t.perturbed_partition = rho_p.partition_function();
  t.ratio = std::exp(rho_p.log_partition_function() - rho.log_partition_function());
  const double m = static_cast<double>(c.rows());
  const double amplification = 1.0 + m * (beta < 0.0 ? std::exp(std::abs(beta) * t.norm_c) : 1.0);
  t.bound = std::abs(beta) * t.norm_dc * t.f_factor / t.ratio * amplification;
  t.actual_error = operator_norm(symmetrized(rho_p.dense() - rho.dense()));
  return t;
}

double density_error_bound(const Matrix& c, const Matrix& dc, double beta) {
  return density_bound_terms(c, dc, beta).bound;
}

}  // namespace cdnn
