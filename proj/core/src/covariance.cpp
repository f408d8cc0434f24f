#include "cdnn/covariance.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <queue>
#include <sstream>
#include <vector>

#include "cdnn/error.hpp"

namespace cdnn {
namespace {

constexpr double kPsdTolerance = 1e-8;
constexpr double kDegenerateTrace = 1e-14;
constexpr int kConnectedGraphAttempts = 100;

bool is_connected(const Matrix& adjacency) {
  const Eigen::Index n = adjacency.rows();
  std::vector<bool> seen(static_cast<std::size_t>(n), false);
  std::queue<Eigen::Index> frontier;
  frontier.push(0);
  seen[0] = true;
  Eigen::Index reached = 1;
  while (!frontier.empty()) {
    const Eigen::Index u = frontier.front();
    frontier.pop();
    for (Eigen::Index v = 0; v < n; ++v) {
      if (adjacency(u, v) != 0.0 && !seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = true;
        ++reached;
        frontier.push(v);
      }
    }
  }
  return reached == n;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

DataMatrix::DataMatrix(Matrix values) : values_(std::move(values)) {
  if (values_.rows() == 0 || values_.cols() == 0) {
    throw Error(ErrorCode::shape, "DataMatrix: empty data");
  }
  if (!values_.allFinite()) {
    throw Error(ErrorCode::non_finite, "DataMatrix: non-finite entries");
  }
}

std::string_view to_string(Regularization r) noexcept {
  switch (r) {
    case Regularization::raw: return "raw";
    case Regularization::shifted_min_eig_zero: return "shifted_min_eig_zero";
    case Regularization::trace_normalized: return "trace_normalized";
  }
  return "raw";
}

CovarianceMatrix::CovarianceMatrix(const Matrix& matrix, Regularization regularization,
                                   double min_eig_shift)
    : matrix_(symmetrized(matrix)),
      regularization_(regularization),
      min_eig_shift_(min_eig_shift) {
  if (!(min_eig_shift_ >= 0.0)) {
    throw Error(ErrorCode::invalid_argument, "CovarianceMatrix: negative min_eig_shift");
  }
  Eigen::SelfAdjointEigenSolver<Matrix> solver(matrix_, Eigen::EigenvaluesOnly);
  const Vector& ev = solver.eigenvalues();
  const double norm = ev.cwiseAbs().maxCoeff();
  if (ev(0) < -kPsdTolerance * std::max(1.0, norm)) {
    throw Error(ErrorCode::invalid_argument,
                "CovarianceMatrix: not positive semidefinite (min eigenvalue " +
                    std::to_string(ev(0)) + ")");
  }
}

CovarianceMatrix sample_covariance(const DataMatrix& data) {
  const Eigen::Index n = data.n_samples();
  if (n < 2) {
    throw Error(ErrorCode::insufficient_data,
                "sample_covariance: need at least 2 samples, got " + std::to_string(n));
  }
  const Eigen::RowVectorXd mean = data.values().colwise().mean();
  const Matrix centered = data.values().rowwise() - mean;
  Matrix c = (centered.transpose() * centered) / static_cast<double>(n);
  return CovarianceMatrix(0.5 * (c + c.transpose()), Regularization::raw, 0.0);
}

CovarianceMatrix shift_regularize(const CovarianceMatrix& c) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(c.matrix(), Eigen::EigenvaluesOnly);
  // PSD input: clamp the tiny negative roundoff so the recorded shift is >= 0.
  const double m = std::max(0.0, solver.eigenvalues()(0));
  Matrix shifted = c.matrix();
  shifted.diagonal().array() -= m;
  return CovarianceMatrix(shifted, Regularization::shifted_min_eig_zero, m);
}

CovarianceMatrix trace_normalize(const CovarianceMatrix& c) {
  const double tr = c.matrix().trace();
  if (!(tr > kDegenerateTrace)) {
    throw Error(ErrorCode::degenerate_covariance,
                "trace_normalize: trace " + std::to_string(tr) + " is not positive");
  }
  return CovarianceMatrix(c.matrix() / tr, Regularization::trace_normalized, 0.0);
}

SpectrumFamily parse_spectrum_family(std::string_view name) {
  if (name == "gaussian") return SpectrumFamily::gaussian;
  if (name == "exponential") return SpectrumFamily::exponential;
  if (name == "gamma") return SpectrumFamily::gamma;
  throw Error(ErrorCode::unknown_family, "unknown spectrum family '" + std::string(name) + "'");
}

std::string_view to_string(SpectrumFamily f) noexcept {
  switch (f) {
    case SpectrumFamily::gaussian: return "gaussian";
    case SpectrumFamily::exponential: return "exponential";
    case SpectrumFamily::gamma: return "gamma";
  }
  return "gaussian";
}

DataMatrix gen_gaussian_data(Eigen::Index dim, Eigen::Index n_samples, SpectrumFamily family,
                             std::uint64_t seed) {
  if (dim < 1 || n_samples < 2) {
    throw Error(ErrorCode::invalid_argument, "gen_gaussian_data: need dim >= 1, n_samples >= 2");
  }
  Rng rng = make_rng(seed);
  Matrix x(n_samples, dim);
  auto fill = [&](auto dist) {
    for (Eigen::Index i = 0; i < n_samples; ++i)
      for (Eigen::Index j = 0; j < dim; ++j) x(i, j) = dist(rng);
  };
  switch (family) {
    case SpectrumFamily::gaussian: fill(std::normal_distribution<double>(0.0, 1.0)); break;
    case SpectrumFamily::exponential: fill(std::exponential_distribution<double>(1.0)); break;
    case SpectrumFamily::gamma: fill(std::gamma_distribution<double>(2.0, 1.0)); break;
  }
  return DataMatrix(std::move(x));
}

Matrix erdos_renyi_laplacian(Eigen::Index dim, double edge_prob, Rng& rng) {
  if (dim < 1) throw Error(ErrorCode::invalid_argument, "erdos_renyi_laplacian: dim < 1");
  if (!(edge_prob > 0.0 && edge_prob <= 1.0)) {
    throw Error(ErrorCode::invalid_argument, "edge_prob must lie in (0, 1]");
  }
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int attempt = 0; attempt < kConnectedGraphAttempts; ++attempt) {
    Matrix adjacency = Matrix::Zero(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) {
      for (Eigen::Index j = i + 1; j < dim; ++j) {
        if (unif(rng) < edge_prob) adjacency(i, j) = adjacency(j, i) = 1.0;
      }
    }
    if (!is_connected(adjacency)) continue;
    Matrix laplacian = -adjacency;
    laplacian.diagonal() = adjacency.rowwise().sum();
    return laplacian;
  }
  throw Error(ErrorCode::generation_failed,
              "no connected Erdos-Renyi graph within " +
                  std::to_string(kConnectedGraphAttempts) + " attempts");
}

GraphStationarySample gen_graph_stationary(Eigen::Index dim, Eigen::Index n_samples,
                                           double edge_prob,
                                           std::span<const double> filter_coeffs,
                                           std::uint64_t seed) {
  if (n_samples < 1) throw Error(ErrorCode::invalid_argument, "n_samples must be >= 1");
  if (filter_coeffs.empty()) {
    throw Error(ErrorCode::invalid_argument, "filter_coeffs must be non-empty");
  }
  Rng rng = make_rng(seed);
  Matrix laplacian = erdos_renyi_laplacian(dim, edge_prob, rng);

  // g(L) = sum_k a_k L^k by Horner's rule.
  Matrix g = filter_coeffs.back() * Matrix::Identity(dim, dim);
  for (auto it = filter_coeffs.rbegin() + 1; it != filter_coeffs.rend(); ++it) {
    g = g * laplacian;
    g.diagonal().array() += *it;
  }

  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix w(n_samples, dim);
  for (Eigen::Index i = 0; i < n_samples; ++i)
    for (Eigen::Index j = 0; j < dim; ++j) w(i, j) = normal(rng);
  // Rows are samples, so x_i^T = w_i^T g(L)^T.
  Matrix x = w * g.transpose();
  return {DataMatrix(std::move(x)), std::move(laplacian)};
}

DataMatrix gen_ar_process(Eigen::Index dim, Eigen::Index n_samples, double ar_coefficient,
                          std::uint64_t seed, double innovation_correlation) {
  if (!(std::abs(ar_coefficient) < 1.0)) {
    throw Error(ErrorCode::nonstationary,
                "gen_ar_process: |phi| = " + std::to_string(std::abs(ar_coefficient)) +
                    " must be < 1");
  }
  if (dim < 1 || n_samples < 1) {
    throw Error(ErrorCode::invalid_argument, "gen_ar_process: need dim >= 1, n_samples >= 1");
  }
  const double lower = dim > 1 ? -1.0 / static_cast<double>(dim - 1) : -1.0;
  if (!(innovation_correlation > lower && innovation_correlation < 1.0)) {
    throw Error(ErrorCode::invalid_argument,
                "innovation correlation must keep the innovation covariance positive definite");
  }
  Matrix sigma = Matrix::Constant(dim, dim, innovation_correlation);
  sigma.diagonal().setOnes();
  const Matrix chol = Eigen::LLT<Matrix>(sigma).matrixL();

  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto innovation = [&]() {
    Vector z(dim);
    for (Eigen::Index j = 0; j < dim; ++j) z(j) = normal(rng);
    return Vector(chol * z);
  };

  Matrix x(n_samples, dim);
  // Start in the stationary law N(0, sigma / (1 - phi^2)).
  Vector state = innovation() / std::sqrt(1.0 - ar_coefficient * ar_coefficient);
  x.row(0) = state.transpose();
  for (Eigen::Index t = 1; t < n_samples; ++t) {
    state = ar_coefficient * state + innovation();
    x.row(t) = state.transpose();
  }
  return DataMatrix(std::move(x));
}

DataMatrix read_data_csv(std::istream& in, bool has_header) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  bool header_pending = has_header;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (header_pending) {
      header_pending = false;
      continue;
    }
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const std::string t = trim(cell);
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(t, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (t.empty() || used != t.size()) {
        throw Error(ErrorCode::parse, "csv line " + std::to_string(line_no) +
                                          ": cannot parse '" + t + "' as a number");
      }
      row.push_back(v);
    }
    if (!line.empty() && line.back() == ',') {
      throw Error(ErrorCode::parse, "csv line " + std::to_string(line_no) + ": trailing comma");
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw Error(ErrorCode::parse, "csv line " + std::to_string(line_no) + ": expected " +
                                        std::to_string(rows.front().size()) + " columns, got " +
                                        std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw Error(ErrorCode::parse, "csv: no data rows");
  Matrix values(static_cast<Eigen::Index>(rows.size()),
                static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j)
      values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
  return DataMatrix(std::move(values));
}

DataMatrix read_data_csv(const std::string& path, bool has_header) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path + "'");
  return read_data_csv(in, has_header);
}

}  // namespace cdnn
