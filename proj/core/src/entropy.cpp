#include "cdnn/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "cdnn/error.hpp"
#include "cdnn/parallel.hpp"
#include "cdnn/random.hpp"

namespace cdnn {
namespace {

constexpr double kSubadditivitySlack = 1e-9;
constexpr double kRankTolerance = 1e-10;

Vector eigenvalues_of(const Matrix& m) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(m, Eigen::EigenvaluesOnly);
  return solver.eigenvalues();
}

}  // namespace

EntropyReport cvne(const DensityOperator& rho) {
  const Vector& p = rho.density_eigenvalues();
  const Vector& log_p = rho.log_density_eigenvalues();
  double s = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) s -= p(i) * log_p(i);

  EntropyReport report;
  report.beta = rho.beta();
  report.entropy_nats = std::max(0.0, s);
  report.entropy_bits = report.entropy_nats / std::numbers::ln2;
  report.gibbs_form_nats = rho.beta() * rho.mean_energy() + rho.log_partition_function();
  report.source_dim = rho.dim();
  const Vector& lambda = rho.source_spectrum();
  const double cutoff = kRankTolerance * std::max(1.0, lambda.cwiseAbs().maxCoeff());
  report.source_rank_estimate = (lambda.array().abs() > cutoff).count();
  return report;
}

EntropyReport cvne(const CovarianceMatrix& c, double beta) {
  return cvne(density_operator(c, beta));
}

double gibbs_entropy(const CovarianceMatrix& c, double beta) {
  const Vector lambda = eigenvalues_of(c.matrix());
  check_overflow_guard(beta, lambda.cwiseAbs().maxCoeff());
  const Vector exponents = -beta * lambda;
  const double top = exponents.maxCoeff();
  const Vector w = (exponents.array() - top).exp().matrix();
  const double log_z = top + std::log(w.sum());
  return beta * (w.dot(lambda) / w.sum()) + log_z;
}

double naive_entropy(const CovarianceMatrix& c) {
  const double tr = c.matrix().trace();
  if (!(tr > 1e-14)) {
    throw Error(ErrorCode::degenerate_covariance, "naive_entropy: trace is not positive");
  }
  const Vector lambda = eigenvalues_of(c.matrix()).cwiseMax(0.0);
  const double total = lambda.sum();
  double s = 0.0;
  for (Eigen::Index i = 0; i < lambda.size(); ++i) {
    const double pi = lambda(i) / total;
    if (pi > 0.0) s -= pi * std::log2(pi);
  }
  return s;
}

SubadditivityResult check_subadditivity(std::span<const CovarianceMatrix> cs, double beta) {
  if (cs.empty()) throw Error(ErrorCode::invalid_argument, "check_subadditivity: no matrices");
  const Eigen::Index dim = cs.front().dim();
  SubadditivityResult result;
  Matrix sum = Matrix::Zero(dim, dim);
  for (const auto& c : cs) {
    if (c.dim() != dim) {
      throw Error(ErrorCode::dimension_mismatch, "check_subadditivity: dimensions differ");
    }
    const CovarianceMatrix shifted = shift_regularize(c);
    result.shifts.push_back(shifted.min_eig_shift());
    result.rhs += cvne(shifted, beta).entropy_nats;
    sum += shifted.matrix();
  }
  const CovarianceMatrix total = shift_regularize(CovarianceMatrix(sum));
  result.sum_shift = total.min_eig_shift();
  result.lhs = cvne(total, beta).entropy_nats;
  result.holds = result.lhs <= result.rhs + kSubadditivitySlack;
  return result;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size() || scores.empty()) {
    throw Error(ErrorCode::dimension_mismatch, "roc_auc: scores and labels differ in length");
  }
  double sum_pos = 0.0, sum_neg = 0.0;
  std::size_t n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == 1) {
      sum_pos += scores[i];
      ++n_pos;
    } else if (labels[i] == 0) {
      sum_neg += scores[i];
      ++n_neg;
    } else {
      throw Error(ErrorCode::invalid_argument, "roc_auc: labels must be 0 or 1");
    }
  }
  if (n_pos == 0 || n_neg == 0) {
    throw Error(ErrorCode::invalid_argument, "roc_auc: need both classes");
  }
  const double sign = sum_pos / static_cast<double>(n_pos) >= sum_neg / static_cast<double>(n_neg) ? 1.0 : -1.0;

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return sign * scores[a] < sign * scores[b];
  });
  // Mann-Whitney U with average ranks over ties.
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && sign * scores[order[j + 1]] == sign * scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) rank_sum_pos += avg_rank;
    }
    i = j + 1;
  }
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n_neg);
  return (rank_sum_pos - np * (np + 1.0) / 2.0) / (np * nn);
}

DiscriminationResult discrimination_experiment(const DiscriminationConfig& config) {
  constexpr Eigen::Index kDim = 3;
  if (config.window < kDim + 1) {
    throw Error(ErrorCode::invalid_argument, "discrimination_experiment: window must be >= dim + 1 = 4");
  }
  if (config.n_windows < 1) {
    throw Error(ErrorCode::invalid_argument, "discrimination_experiment: n_windows must be >= 1");
  }
  for (std::size_t i = 0; i < 3; ++i) {
    if (!(config.base_spectrum[i] >= 0.0) || !(config.regime_scale[i] > 0.0)) {
      throw Error(ErrorCode::invalid_argument,
                  "discrimination_experiment: spectrum must be >= 0 and scales > 0");
    }
  }

  const auto per_regime = static_cast<std::size_t>(config.n_windows);
  DiscriminationResult result;
  result.windows.resize(2 * per_regime);

  parallel_for(2 * per_regime, config.threads, [&](std::size_t idx) {
    const int regime = idx < per_regime ? 0 : 1;
    const std::size_t w = idx % per_regime;
    Vector stddev(kDim);
    for (Eigen::Index j = 0; j < kDim; ++j) {
      const auto u = static_cast<std::size_t>(j);
      const double var = config.base_spectrum[u] * (regime == 1 ? config.regime_scale[u] : 1.0);
      stddev(j) = std::sqrt(var);
    }
    Rng rng = make_rng(config.seed, idx);
    std::normal_distribution<double> normal(0.0, 1.0);
    Matrix x(config.window, kDim);
    for (Eigen::Index r = 0; r < config.window; ++r)
      for (Eigen::Index j = 0; j < kDim; ++j) x(r, j) = stddev(j) * normal(rng);
    const CovarianceMatrix c = sample_covariance(DataMatrix(std::move(x)));
    WindowScore& s = result.windows[idx];
    s.window_index = static_cast<Eigen::Index>(w);
    s.regime = regime;
    s.s_naive_bits = naive_entropy(c);
    s.s_vne_bits = cvne(c, config.beta).entropy_bits;
  });

  std::vector<double> naive, vne;
  std::vector<int> labels;
  for (const auto& s : result.windows) {
    naive.push_back(s.s_naive_bits);
    vne.push_back(s.s_vne_bits);
    labels.push_back(s.regime);
  }
  result.auc_naive = roc_auc(naive, labels);
  result.auc_vne = roc_auc(vne, labels);
  return result;
}

}  // namespace cdnn
