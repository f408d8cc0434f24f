#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>

#include "cdnn/random.hpp"
#include "cdnn/spectral.hpp"

namespace cdnn {

/// Observations in rows, variables in columns. Entries are finite.
class DataMatrix {
 public:
  explicit DataMatrix(Matrix values);

  Eigen::Index n_samples() const noexcept { return values_.rows(); }
  Eigen::Index dim() const noexcept { return values_.cols(); }
  const Matrix& values() const noexcept { return values_; }

 private:
  Matrix values_;
};

enum class Regularization { raw, shifted_min_eig_zero, trace_normalized };

std::string_view to_string(Regularization r) noexcept;

/// Symmetric positive semidefinite matrix tagged with how it was regularized.
///
/// Construction symmetrizes small roundoff asymmetry and rejects matrices with
/// min eigenvalue below -1e-8 * ||C||.
class CovarianceMatrix {
 public:
  explicit CovarianceMatrix(const Matrix& matrix,
                            Regularization regularization = Regularization::raw,
                            double min_eig_shift = 0.0);

  Eigen::Index dim() const noexcept { return matrix_.rows(); }
  const Matrix& matrix() const noexcept { return matrix_; }
  Regularization regularization() const noexcept { return regularization_; }
  double min_eig_shift() const noexcept { return min_eig_shift_; }

 private:
  Matrix matrix_;
  Regularization regularization_;
  double min_eig_shift_;
};

/// (1/n) sum_k (x_k - mean)(x_k - mean)^T. The divisor is n, not n - 1.
CovarianceMatrix sample_covariance(const DataMatrix& data);

/// C - m I with m the minimum eigenvalue; the result has min eigenvalue 0.
CovarianceMatrix shift_regularize(const CovarianceMatrix& c);

/// C / tr(C). Throws degenerate_covariance when tr(C) <= 1e-14.
CovarianceMatrix trace_normalize(const CovarianceMatrix& c);

enum class SpectrumFamily { gaussian, exponential, gamma };

SpectrumFamily parse_spectrum_family(std::string_view name);
std::string_view to_string(SpectrumFamily f) noexcept;

/// Entries i.i.d. from the family: N(0,1), Exp(rate 1), Gamma(shape 2, scale 1).
DataMatrix gen_gaussian_data(Eigen::Index dim, Eigen::Index n_samples,
                             SpectrumFamily family, std::uint64_t seed);

struct GraphStationarySample {
  DataMatrix data;
  Matrix laplacian;
};

/// Combinatorial Laplacian L = D - A of a connected Erdos-Renyi graph.
/// Retries up to 100 times before failing with generation_failed.
Matrix erdos_renyi_laplacian(Eigen::Index dim, double edge_prob, Rng& rng);

/// Signals x = sum_k a_k L^k w with w ~ N(0, I), one row per sample.
GraphStationarySample gen_graph_stationary(Eigen::Index dim, Eigen::Index n_samples,
                                           double edge_prob,
                                           std::span<const double> filter_coeffs,
                                           std::uint64_t seed);

inline constexpr double kDefaultInnovationCorrelation = 0.6;

/// Stationary AR(1) panel x_t = phi x_{t-1} + e_t where the innovations are
/// equicorrelated Gaussians (unit variance, pairwise correlation as given).
DataMatrix gen_ar_process(Eigen::Index dim, Eigen::Index n_samples, double ar_coefficient,
                          std::uint64_t seed,
                          double innovation_correlation = kDefaultInnovationCorrelation);

/// Comma-separated rows of numbers; rows are observations. Ragged rows, empty
/// input and non-numeric cells are parse errors.
DataMatrix read_data_csv(std::istream& in, bool has_header);
DataMatrix read_data_csv(const std::string& path, bool has_header);

}  // namespace cdnn
