#include "cdnn/filter.hpp"

#include <cmath>
#include <string>

#include "cdnn/error.hpp"

namespace cdnn {
namespace {

// Relative eigenvalue gap under which the eigenbasis is treated as ambiguous.
constexpr double kRepeatedEigenvalueGap = 1e-8;

void require_len(const Vector& x, Eigen::Index dim, const char* who) {
  if (x.size() != dim) {
    throw Error(ErrorCode::dimension_mismatch, std::string(who) + ": vector length " +
                                                   std::to_string(x.size()) + " != dim " +
                                                   std::to_string(dim));
  }
}

int first_tap(const FilterSpec& f) { return f.skip_k0 ? 1 : 0; }

bool has_repeated_eigenvalues(const Vector& ev) {
  const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
  for (Eigen::Index i = 1; i < ev.size(); ++i) {
    if (ev(i) - ev(i - 1) <= kRepeatedEigenvalueGap * scale) return true;
  }
  return false;
}

}  // namespace

void FilterSpec::validate() const {
  if (coeffs.empty()) throw Error(ErrorCode::invalid_argument, "FilterSpec: no coefficients");
  for (double h : coeffs) {
    if (!std::isfinite(h)) throw Error(ErrorCode::invalid_argument, "FilterSpec: non-finite h_k");
  }
  if (!std::isfinite(beta)) throw Error(ErrorCode::invalid_argument, "FilterSpec: non-finite beta");
}

double filter_polynomial(const FilterSpec& f, double r) {
  double acc = 0.0;
  for (int k = f.order(); k >= first_tap(f); --k) acc = acc * r + f.coeffs[static_cast<std::size_t>(k)];
  if (f.skip_k0) acc *= r;
  return acc;
}

double filter_polynomial_derivative(const FilterSpec& f, double r) {
  double acc = 0.0;
  for (int k = f.order(); k >= 1; --k) acc = acc * r + k * f.coeffs[static_cast<std::size_t>(k)];
  return acc;
}

Vector filter_apply(const FilterSpec& f, const DensityOperator& rho, const Vector& x) {
  f.validate();
  require_len(x, rho.dim(), "filter_apply");
  if (f.beta != rho.beta()) {
    throw Error(ErrorCode::invalid_argument, "filter_apply: filter beta " +
                                                 std::to_string(f.beta) + " != density beta " +
                                                 std::to_string(rho.beta()));
  }
  const Matrix& v = rho.basis().eigenvectors();
  Vector coords = v.transpose() * x;
  const Vector& r = rho.density_eigenvalues();
  for (Eigen::Index i = 0; i < coords.size(); ++i) coords(i) *= filter_polynomial(f, r(i));
  return v * coords;
}

Vector filter_apply_dense(const FilterSpec& f, const DensityOperator& rho, const Vector& x) {
  f.validate();
  require_len(x, rho.dim(), "filter_apply_dense");
  const Matrix p = rho.dense();
  Vector power = x;
  Vector out = Vector::Zero(x.size());
  for (int k = 0; k <= f.order(); ++k) {
    if (k > 0) power = p * power;
    if (k >= first_tap(f)) out += f.coeffs[static_cast<std::size_t>(k)] * power;
  }
  return out;
}

double frequency_response(const FilterSpec& f, double lambda, double partition) {
  if (!(partition > 0.0)) {
    throw Error(ErrorCode::invalid_argument, "frequency_response: Z must be positive");
  }
  return filter_polynomial(f, std::exp(-f.beta * lambda) / partition);
}

double lipschitz_alpha(const FilterSpec& f) {
  double alpha = 0.0;
  for (int k = first_tap(f); k <= f.order(); ++k) {
    alpha += std::abs(f.coeffs[static_cast<std::size_t>(k)]) * std::abs(f.beta * k);
  }
  return alpha;
}

double integral_lipschitz_theta(const FilterSpec& f, const Vector& spectrum) {
  if (spectrum.size() == 0) {
    throw Error(ErrorCode::invalid_argument, "integral_lipschitz_theta: empty spectrum");
  }
  // max |l_i + l_j| / 2 is attained at i = j on whichever end has larger magnitude.
  const double sup_mean = std::max(std::abs(spectrum.maxCoeff()), std::abs(spectrum.minCoeff()));
  return lipschitz_alpha(f) * sup_mean;
}

Vector vft(const SpectralDecomposition& decomposition, const Vector& x) {
  require_len(x, decomposition.dim(), "vft");
  return decomposition.eigenvectors().transpose() * x;
}

Vector inverse_vft(const SpectralDecomposition& decomposition, const Vector& coords) {
  require_len(coords, decomposition.dim(), "inverse_vft");
  return decomposition.eigenvectors() * coords;
}

void validate_permutation(const Permutation& perm, Eigen::Index dim) {
  if (static_cast<Eigen::Index>(perm.size()) != dim) {
    throw Error(ErrorCode::invalid_permutation, "permutation has length " +
                                                    std::to_string(perm.size()) + ", expected " +
                                                    std::to_string(dim));
  }
  std::vector<bool> seen(perm.size(), false);
  for (std::size_t p : perm) {
    if (p >= perm.size() || seen[p]) {
      throw Error(ErrorCode::invalid_permutation, "permutation is not a bijection");
    }
    seen[p] = true;
  }
}

Matrix permutation_matrix(const Permutation& perm) {
  const auto n = static_cast<Eigen::Index>(perm.size());
  Matrix t = Matrix::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) t(static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]), i) = 1.0;
  return t;
}

double check_permutation_equivariance(const FilterSpec& f, const CovarianceMatrix& c,
                                      const Vector& x, const Permutation& perm) {
  f.validate();
  require_len(x, c.dim(), "check_permutation_equivariance");
  validate_permutation(perm, c.dim());
  const Matrix t = permutation_matrix(perm);
  const Matrix permuted = t.transpose() * c.matrix() * t;
  const Vector x_perm = t.transpose() * x;

  const DensityOperator rho(f.beta, eigh(c.matrix()));
  const DensityOperator rho_perm(f.beta, eigh(permuted));
  const bool dense = has_repeated_eigenvalues(rho.source_spectrum());
  const Vector lhs = dense ? filter_apply_dense(f, rho_perm, x_perm) : filter_apply(f, rho_perm, x_perm);
  const Vector rhs = t.transpose() * (dense ? filter_apply_dense(f, rho, x) : filter_apply(f, rho, x));
  return (lhs - rhs).cwiseAbs().maxCoeff();
}

}  // namespace cdnn
