#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "cdnn/covariance.hpp"
#include "cdnn/density.hpp"

namespace cdnn {

struct EntropyReport {
  double beta = 0.0;
  double entropy_nats = 0.0;
  double entropy_bits = 0.0;
  double gibbs_form_nats = 0.0;
  Eigen::Index source_dim = 0;
  Eigen::Index source_rank_estimate = 0;
};

/// Multiscale von Neumann entropy S = -sum_i rho_i ln rho_i of rho_beta(C).
/// Finite for singular C.
EntropyReport cvne(const CovarianceMatrix& c, double beta);
EntropyReport cvne(const DensityOperator& rho);

/// Gibbs form beta tr[C rho] + ln Z. Equals cvne().entropy_nats.
double gibbs_entropy(const CovarianceMatrix& c, double beta);

/// Shannon entropy in bits of lambda_i / tr(C) with 0 log 0 = 0. Tiny negative
/// roundoff eigenvalues are clamped to zero.
double naive_entropy(const CovarianceMatrix& c);

struct SubadditivityResult {
  double lhs = 0.0;  ///< S(sum_j C_j), nats
  double rhs = 0.0;  ///< sum_j S(C_j), nats
  bool holds = false;
  std::vector<double> shifts;  ///< min-eigenvalue shifts of each C_j
  double sum_shift = 0.0;      ///< shift applied to the sum
};

/// Shift-regularizes every input and their sum, then compares
/// S(sum) <= sum S(C_j) + 1e-9.
SubadditivityResult check_subadditivity(std::span<const CovarianceMatrix> cs, double beta);

/// Area under the ROC curve of a 1-D score for labels in {0, 1}, using the
/// rank (threshold-sweep) formulation with ties counted as 1/2. The score is
/// oriented so the class with the larger mean counts as positive.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct DiscriminationConfig {
  Eigen::Index window = 128;
  Eigen::Index n_windows = 500;  ///< windows per regime
  double beta = 2.0;
  std::array<double, 3> base_spectrum{1.0, 1.0, 0.0};
  std::array<double, 3> regime_scale{1.3, 1.2, 1.1};
  std::uint64_t seed = 3;
  unsigned threads = 0;
};

struct WindowScore {
  Eigen::Index window_index = 0;
  int regime = 0;
  double s_naive_bits = 0.0;
  double s_vne_bits = 0.0;
};

struct DiscriminationResult {
  double auc_naive = 0.0;
  double auc_vne = 0.0;
  std::vector<WindowScore> windows;
};

/// Two regimes of 3-dim zero-mean Gaussians, diag(base) and diag(base * scale);
/// each window's sample covariance is scored by naive entropy and CVNE.
DiscriminationResult discrimination_experiment(const DiscriminationConfig& config);

}  // namespace cdnn
