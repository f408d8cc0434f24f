#pragma once

#include "cdnn/covariance.hpp"
#include "cdnn/density.hpp"

namespace cdnn {

struct MomentDerivatives {
  double first = 0.0;   ///< f'(beta) = sum p_i l_i - E_q[l]
  double second = 0.0;  ///< f''(beta) = Var_q[l]
};

/// f(beta) = beta sum_i p_i l_i + ln sum_j exp(-beta l_j), the KL divergence
/// D(p || q_beta) minus the constant sum_i p_i ln p_i.
double moment_objective(const Vector& spectrum, const Vector& target_p, double beta);
MomentDerivatives moment_derivatives(const Vector& spectrum, const Vector& target_p, double beta);

/// q_beta,i = exp(-beta l_i) / sum_j exp(-beta l_j).
Vector gibbs_distribution(const Vector& spectrum, double beta);
/// D(p || q) in nats, with 0 ln 0 = 0.
double kl_divergence(const Vector& p, const Vector& q);
/// l_i / sum_j l_j; throws degenerate_covariance when the sum is not positive.
Vector trace_normalized_spectrum(const Vector& spectrum);

struct BetaFitConfig {
  int max_iter = 200;
  double tol = 1e-10;
  double bracket_growth = 2.0;
  int max_expansions = 60;
  double initial_beta = 0.0;   ///< centre of the starting bracket
  double initial_radius = 1.0; ///< starting bracket is centre +- radius
};

struct BetaFitResult {
  double beta_star = 0.0;
  double objective_value = 0.0;
  double gradient_at_solution = 0.0;
  double curvature_at_solution = 0.0;
  int iterations = 0;
  bool degenerate = false;
  bool converged = false;
};

/// Unique minimiser of the moment objective: brackets the sign change of f'
/// by geometric expansion, then runs Newton steps safeguarded by bisection.
/// Constant spectra return beta* = 0 flagged degenerate. A target mean outside
/// the open interval (min l, max l) throws infeasible_target.
BetaFitResult fit_beta(const Vector& spectrum, const Vector& target_p,
                       const BetaFitConfig& config = {});

/// Density operator of C at the fitted inverse temperature.
DensityOperator reconstruct_density(const CovarianceMatrix& c, double beta_star);

}  // namespace cdnn
