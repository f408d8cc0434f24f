#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cdnn/covariance.hpp"
#include "cdnn/filter.hpp"

namespace cdnn {

enum class Experiment { stability, lipschitz, surrogate, regression, entropy_curve, discrimination, betafit_demo };

/// Accepts both "entropy_curve" and "entropy-curve" spellings.
Experiment parse_experiment(std::string_view name);
std::string_view to_string(Experiment e) noexcept;

/// Seeded description of one lab run. Fields an experiment does not use are
/// ignored by it.
struct ExperimentConfig {
  Experiment experiment = Experiment::stability;
  Eigen::Index dim = 20;
  Eigen::Index n_samples = 200;
  std::vector<Eigen::Index> sample_sizes;  ///< surrogate n grid, regression covariance sizes
  std::vector<double> betas;
  std::vector<double> noise_levels;
  int trials = 100;
  std::uint64_t seed = 0;
  unsigned threads = 0;  ///< 0 = available cores

  bool include_baseline = true;  ///< stability: trace-normalized C rows

  int filter_order = 3;               ///< lipschitz
  Eigen::Index pairs_per_trial = 100;  ///< lipschitz

  double edge_prob = 0.5;                    ///< surrogate
  std::vector<double> filter_coeffs{1.0, 0.5};  ///< surrogate graph filter g

  Eigen::Index informative = 5;  ///< regression
  Eigen::Index n_train = 100;
  Eigen::Index n_test = 1000;
  int gd_iterations = 200;

  std::vector<SpectrumFamily> families{SpectrumFamily::gaussian, SpectrumFamily::exponential,
                                       SpectrumFamily::gamma};  ///< entropy_curve

  Eigen::Index window = 128;  ///< discrimination; trials = windows per regime
  std::array<double, 3> base_spectrum{1.0, 1.0, 0.0};
  std::array<double, 3> regime_scale{1.3, 1.2, 1.1};

  /// Throws invalid_config naming the offending field.
  void validate() const;
};

/// Defaults matching the desk-scale version of each experiment.
ExperimentConfig default_experiment_config(Experiment e);

/// One result row. Parameter values are kept as text so mixed kinds (method
/// names, numbers) share a column layout.
struct TrialRecord {
  std::string experiment;
  std::int64_t trial = 0;
  std::uint64_t seed = 0;
  std::vector<std::pair<std::string, std::string>> params;
  std::vector<std::pair<std::string, double>> metrics;

  bool has_metric(std::string_view name) const;
  double metric(std::string_view name) const;
  const std::string& param(std::string_view name) const;
  bool operator==(const TrialRecord&) const = default;
};

struct ExperimentResult {
  std::vector<TrialRecord> records;
  /// Per-group metric statistics plus the experiment's trend checks.
  nlohmann::json summary;
};

/// |h(rho(l2)) - h(rho(l1))| / (alpha |l2 - l1|) at fixed partition Z. Empty
/// for an identical pair; 0 when alpha = 0 (the response is then constant).
std::optional<double> lipschitz_ratio(const FilterSpec& f, double l1, double l2, double partition);

/// Mean over matched eigenvectors of the norm of each sample-covariance
/// eigenvector projected onto its Laplacian eigenspace. Laplacian eigenvectors
/// are ordered by g(lambda)^2, the covariance spectrum they map to, so the
/// matching follows g whether it is increasing or decreasing. Ties in g^2 are
/// grouped into one eigenspace; `degenerate` is set when any tie exists and
/// alignment is empty when every eigenvalue ties.
struct SurrogateAlignment {
  std::optional<double> mean_alignment;
  double min_alignment = 0.0;
  bool degenerate = false;
};
SurrogateAlignment surrogate_alignment(const Matrix& sample_cov, const Matrix& laplacian,
                                       std::span<const double> filter_coeffs);

ExperimentResult run_stability(const ExperimentConfig& cfg);
ExperimentResult run_lipschitz(const ExperimentConfig& cfg);
ExperimentResult run_surrogate(const ExperimentConfig& cfg);
ExperimentResult run_regression(const ExperimentConfig& cfg);
ExperimentResult run_entropy_curve(const ExperimentConfig& cfg);
ExperimentResult run_discrimination(const ExperimentConfig& cfg);
ExperimentResult run_betafit_demo(const ExperimentConfig& cfg);
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Shortest text that parses back to the same double.
std::string format_double(double v);

/// Columns: experiment, trial, seed, param.<name>..., metric.<name>... in
/// first-seen order; absent cells are empty.
void write_records_csv(std::ostream& out, const std::vector<TrialRecord>& records);
std::vector<TrialRecord> read_records_csv(std::istream& in);

nlohmann::json records_to_json(const std::vector<TrialRecord>& records);
std::vector<TrialRecord> records_from_json(const nlohmann::json& j);

/// Mean, standard deviation, min, max and count of every metric, grouped by
/// the listed parameters (in record order of first appearance).
nlohmann::json summarize_records(const std::vector<TrialRecord>& records,
                                 const std::vector<std::string>& group_by);

nlohmann::json config_to_json(const ExperimentConfig& cfg);

}  // namespace cdnn
