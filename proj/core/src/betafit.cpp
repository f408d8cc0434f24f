#include "cdnn/betafit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "cdnn/error.hpp"

namespace cdnn {
namespace {

constexpr double kProbabilityTolerance = 1e-10;

void validate(const Vector& spectrum, const Vector& p) {
  if (spectrum.size() == 0) throw Error(ErrorCode::invalid_argument, "empty spectrum");
  if (!spectrum.allFinite()) throw Error(ErrorCode::non_finite, "spectrum has non-finite entries");
  if (p.size() != spectrum.size()) {
    throw Error(ErrorCode::dimension_mismatch,
                "target has length " + std::to_string(p.size()) + ", spectrum has " +
                    std::to_string(spectrum.size()));
  }
  if (!p.allFinite() || (p.array() < 0.0).any() ||
      std::abs(p.sum() - 1.0) > kProbabilityTolerance) {
    throw Error(ErrorCode::invalid_probability,
                "target must be nonnegative and sum to 1 (sum = " + std::to_string(p.sum()) + ")");
  }
}

struct Moments {
  double log_z;
  double mean;
  double variance;
};

Moments gibbs_moments(const Vector& spectrum, double beta) {
  const Vector exponents = -beta * spectrum;
  const double top = exponents.maxCoeff();
  const Vector w = (exponents.array() - top).exp().matrix();
  const double sum = w.sum();
  const double mean = w.dot(spectrum) / sum;
  const Vector centered = spectrum.array() - mean;
  const double variance = w.dot(centered.cwiseProduct(centered)) / sum;
  return {top + std::log(sum), mean, variance};
}

bool is_constant(const Vector& spectrum) {
  const double span = spectrum.maxCoeff() - spectrum.minCoeff();
  return span <= 1e-12 * std::max(1.0, spectrum.cwiseAbs().maxCoeff());
}

}  // namespace

double moment_objective(const Vector& spectrum, const Vector& target_p, double beta) {
  validate(spectrum, target_p);
  return beta * target_p.dot(spectrum) + gibbs_moments(spectrum, beta).log_z;
}

MomentDerivatives moment_derivatives(const Vector& spectrum, const Vector& target_p, double beta) {
  validate(spectrum, target_p);
  const Moments m = gibbs_moments(spectrum, beta);
  return {target_p.dot(spectrum) - m.mean, m.variance};
}

Vector gibbs_distribution(const Vector& spectrum, double beta) {
  const Vector exponents = -beta * spectrum;
  const Vector w = (exponents.array() - exponents.maxCoeff()).exp().matrix();
  return w / w.sum();
}

double kl_divergence(const Vector& p, const Vector& q) {
  if (p.size() != q.size()) throw Error(ErrorCode::dimension_mismatch, "kl_divergence: length mismatch");
  double d = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) > 0.0) d += p(i) * std::log(p(i) / q(i));
  }
  return d;
}

Vector trace_normalized_spectrum(const Vector& spectrum) {
  const double total = spectrum.sum();
  if (!(total > 1e-14)) {
    throw Error(ErrorCode::degenerate_covariance, "spectrum sum is not positive");
  }
  return spectrum / total;
}

BetaFitResult fit_beta(const Vector& spectrum, const Vector& target_p, const BetaFitConfig& config) {
  validate(spectrum, target_p);
  if (config.max_iter < 1 || !(config.tol > 0.0) || !(config.bracket_growth > 1.0) ||
      !(config.initial_radius > 0.0) || !std::isfinite(config.initial_beta)) {
    throw Error(ErrorCode::invalid_argument, "fit_beta: invalid configuration");
  }

  BetaFitResult result;
  if (is_constant(spectrum)) {
    result.degenerate = true;
    result.converged = true;
    result.objective_value = moment_objective(spectrum, target_p, 0.0);
    return result;
  }

  const double target_mean = target_p.dot(spectrum);
  if (!(target_mean > spectrum.minCoeff() && target_mean < spectrum.maxCoeff())) {
    throw Error(ErrorCode::infeasible_target,
                "target mean " + std::to_string(target_mean) +
                    " lies outside the open spectral range (" +
                    std::to_string(spectrum.minCoeff()) + ", " +
                    std::to_string(spectrum.maxCoeff()) + ")");
  }

  // f' is nondecreasing in beta; find lo with f'(lo) <= 0 <= f'(hi).
  auto grad = [&](double b) { return target_mean - gibbs_moments(spectrum, b).mean; };
  double radius = config.initial_radius;
  double lo = config.initial_beta - radius;
  int expansions = 0;
  while (grad(lo) > 0.0) {
    if (++expansions > config.max_expansions) {
      throw Error(ErrorCode::infeasible_target, "fit_beta: no sign change below the start");
    }
    radius *= config.bracket_growth;
    lo = config.initial_beta - radius;
  }
  radius = config.initial_radius;
  double hi = config.initial_beta + radius;
  expansions = 0;
  while (grad(hi) < 0.0) {
    if (++expansions > config.max_expansions) {
      throw Error(ErrorCode::infeasible_target, "fit_beta: no sign change above the start");
    }
    radius *= config.bracket_growth;
    hi = config.initial_beta + radius;
  }

  double x = std::clamp(config.initial_beta, lo, hi);
  int iter = 0;
  Moments m = gibbs_moments(spectrum, x);
  double g = target_mean - m.mean;
  // Once |f'| <= tol, a few more Newton steps pin beta itself down; with small
  // curvature the gradient test alone leaves beta loose by tol / f''.
  auto beta_settled = [&] {
    return !(m.variance > 0.0) || std::abs(g) / m.variance <= 1e-13 * std::max(1.0, std::abs(x));
  };
  int polish = 0;
  while (iter < config.max_iter && (std::abs(g) > config.tol || (!beta_settled() && polish < 3))) {
    if (std::abs(g) <= config.tol) ++polish;
    ++iter;
    if (g < 0.0) lo = x; else hi = x;
    double next = x - g / m.variance;
    if (!(m.variance > 0.0) || !(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == x || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(x))) {
      x = next;
      m = gibbs_moments(spectrum, x);
      g = target_mean - m.mean;
      break;
    }
    x = next;
    m = gibbs_moments(spectrum, x);
    g = target_mean - m.mean;
  }

  result.beta_star = x;
  result.gradient_at_solution = g;
  result.curvature_at_solution = m.variance;
  result.objective_value = x * target_mean + m.log_z;
  result.iterations = iter;
  result.converged = std::abs(g) <= config.tol;
  return result;
}

DensityOperator reconstruct_density(const CovarianceMatrix& c, double beta_star) {
  return density_operator(c, beta_star);
}

}  // namespace cdnn
