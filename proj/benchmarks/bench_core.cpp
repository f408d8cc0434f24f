#include <random>

#include <benchmark/benchmark.h>

#include "cdnn/entropy.hpp"
#include "cdnn/filter.hpp"
#include "cdnn/network.hpp"

using namespace cdnn;

namespace {

Matrix random_covariance(Eigen::Index dim) {
  Rng rng = make_rng(1);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(2 * dim, dim);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  return sample_covariance(DataMatrix(x)).matrix();
}

Vector random_signal(Eigen::Index dim) {
  Rng rng = make_rng(2);
  std::normal_distribution<double> normal(0.0, 1.0);
  Vector x(dim);
  for (auto& v : x) v = normal(rng);
  return x;
}

void BM_Eigh(benchmark::State& state) {
  const Matrix c = random_covariance(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(eigh(c));
}
BENCHMARK(BM_Eigh)->RangeMultiplier(2)->Range(8, 128);

void BM_DensityOperator(benchmark::State& state) {
  const auto basis = eigh(random_covariance(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(density_operator(basis, 1.0));
}
BENCHMARK(BM_DensityOperator)->RangeMultiplier(2)->Range(8, 128);

void BM_Cvne(benchmark::State& state) {
  const CovarianceMatrix c(random_covariance(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(cvne(c, 1.0));
}
BENCHMARK(BM_Cvne)->RangeMultiplier(2)->Range(8, 128);

void BM_FilterApply(benchmark::State& state) {
  const auto rho = density_operator(eigh(random_covariance(state.range(0))), 1.0);
  const FilterSpec f{{0.5, 1.0, -0.5, 0.25}, 1.0};
  const Vector x = random_signal(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(filter_apply(f, rho, x));
}
BENCHMARK(BM_FilterApply)->RangeMultiplier(2)->Range(8, 128);

void BM_FilterApplyDense(benchmark::State& state) {
  const auto rho = density_operator(eigh(random_covariance(state.range(0))), 1.0);
  const FilterSpec f{{0.5, 1.0, -0.5, 0.25}, 1.0};
  const Vector x = random_signal(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(filter_apply_dense(f, rho, x));
}
BENCHMARK(BM_FilterApplyDense)->RangeMultiplier(2)->Range(8, 128);

void BM_ModelForward(benchmark::State& state) {
  const Eigen::Index dim = state.range(0);
  const auto basis = eigh(random_covariance(dim));
  ModelSpec spec;
  spec.hidden_dim = 32;
  const auto m = init_model(spec, dim, 16, 1, 3);
  Rng rng = make_rng(4);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix x(dim, 16);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);
  for (auto _ : state) benchmark::DoNotOptimize(model_forward(m, basis, x));
}
BENCHMARK(BM_ModelForward)->RangeMultiplier(2)->Range(8, 64);

void BM_ModelGradients(benchmark::State& state) {
  const Eigen::Index dim = state.range(0);
  const auto basis = eigh(random_covariance(dim));
  ModelSpec spec;
  spec.hidden_dim = 32;
  spec.betas_learnable = true;
  const auto m = init_model(spec, dim, 8, 1, 3);
  Rng rng = make_rng(5);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset batch(16);
  for (auto& s : batch) {
    s.signal = Matrix(dim, 8);
    for (Eigen::Index i = 0; i < s.signal.size(); ++i) s.signal.data()[i] = normal(rng);
    s.target = Vector::Constant(1, normal(rng));
  }
  for (auto _ : state) benchmark::DoNotOptimize(model_gradients(m, basis, batch, Loss::mse));
}
BENCHMARK(BM_ModelGradients)->RangeMultiplier(2)->Range(8, 64);

}  // namespace

BENCHMARK_MAIN();
