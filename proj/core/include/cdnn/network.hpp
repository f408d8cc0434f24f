#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cdnn/covariance.hpp"
#include "cdnn/density.hpp"
#include "cdnn/filter.hpp"
#include "cdnn/random.hpp"

namespace cdnn {

enum class Activation { identity, tanh, relu, elu };
enum class Aggregation { concatenate, sum, mean };
enum class Task { regression, classification };
enum class Loss { mse, mae, cross_entropy };

Activation parse_activation(std::string_view name);
Aggregation parse_aggregation(std::string_view name);
Task parse_task(std::string_view name);
Loss parse_loss(std::string_view name);
std::string_view to_string(Activation a) noexcept;
std::string_view to_string(Aggregation a) noexcept;
std::string_view to_string(Task t) noexcept;
std::string_view to_string(Loss l) noexcept;

double activate(Activation a, double u) noexcept;

/// sigma(H(rho) x), elementwise activation of a density filter output.
Vector perceptron_forward(const FilterSpec& f, const DensityOperator& rho, Activation activation,
                          const Vector& x);

/// One multi-scale filter-bank layer: f_out scales, each with its own beta and
/// an order-K filter per input channel.
struct LayerParams {
  int f_in = 1;
  int f_out = 1;
  int order = 1;  ///< K; every filter has K + 1 taps
  std::vector<double> coeffs;  ///< f_out x f_in x (K + 1), tap index fastest
  std::vector<double> betas;   ///< one per output scale
  bool betas_learnable = false;
  bool skip_k0 = false;
  Aggregation aggregation = Aggregation::concatenate;
  Activation activation = Activation::tanh;

  int taps() const noexcept { return order + 1; }
  std::size_t coeff_index(int scale, int channel, int k) const noexcept {
    return (static_cast<std::size_t>(scale) * static_cast<std::size_t>(f_in) +
            static_cast<std::size_t>(channel)) * static_cast<std::size_t>(taps()) +
           static_cast<std::size_t>(k);
  }
  double coeff(int scale, int channel, int k) const { return coeffs[coeff_index(scale, channel, k)]; }
  double& coeff(int scale, int channel, int k) { return coeffs[coeff_index(scale, channel, k)]; }
  FilterSpec filter(int scale, int channel) const;
  int output_channels() const noexcept {
    return aggregation == Aggregation::concatenate ? f_out : 1;
  }
  /// Throws invalid_config on shape mismatch or non-finite parameters.
  void validate() const;
};

/// Per-scale outputs summed over input channels, activated, then aggregated.
/// `densities` holds one operator per scale, all built on the same C.
std::vector<Vector> layer_forward(const LayerParams& p, std::span<const DensityOperator> densities,
                                  std::span<const Vector> inputs);

/// hidden = act(w1 v + b1), output = w2 hidden + b2.
struct HeadParams {
  Activation hidden_activation = Activation::tanh;
  Matrix w1;
  Vector b1;
  Matrix w2;
  Vector b2;
};

struct ModelParams {
  Task task = Task::regression;
  Eigen::Index dim = 0;         ///< graph size m
  Eigen::Index time_steps = 1;  ///< columns of each input signal
  std::vector<LayerParams> layers;
  HeadParams head;

  Eigen::Index output_dim() const noexcept { return head.w2.rows(); }
  /// Length of the flattened feature vector entering the head.
  Eigen::Index flat_dim() const;
  void validate() const;
};

/// One example: `signal` is dim x time_steps; regression uses `target`,
/// classification uses `label`.
struct Sample {
  Matrix signal;
  Vector target;
  int label = -1;
};

using Dataset = std::vector<Sample>;

struct ModelSpec {
  Task task = Task::regression;
  int num_layers = 1;
  int order = 2;
  std::vector<double> betas{0.1, 5.0, 15.1};
  bool betas_learnable = false;
  bool skip_k0 = false;
  Aggregation aggregation = Aggregation::concatenate;
  Activation activation = Activation::tanh;
  Activation head_activation = Activation::tanh;
  int hidden_dim = 128;
};

ModelParams init_model(const ModelSpec& spec, Eigen::Index dim, Eigen::Index time_steps,
                       Eigen::Index output_dim, std::uint64_t seed);

/// Prediction (regression values or class logits) for one signal. The
/// covariance is fixed; only its eigenbasis is used.
Vector model_forward(const ModelParams& m, const SpectralDecomposition& basis, const Matrix& x);
Vector model_forward(const ModelParams& m, const CovarianceMatrix& c, const Matrix& x);

/// Per-layer channel outputs before flattening (used for equivariance checks).
std::vector<std::vector<Matrix>> model_layer_outputs(const ModelParams& m,
                                                     const SpectralDecomposition& basis,
                                                     const Matrix& x);

enum class ParamKind { coefficient, beta, head };

/// Visits every trainable scalar of m in a fixed order. Betas are visited only
/// for layers with betas_learnable.
template <class Model, class Fn>
void for_each_parameter(Model& m, Fn&& fn) {
  for (auto& layer : m.layers) {
    for (auto& h : layer.coeffs) fn(h, ParamKind::coefficient);
    if (layer.betas_learnable) {
      for (auto& b : layer.betas) fn(b, ParamKind::beta);
    }
  }
  auto visit = [&](auto& mat) {
    for (Eigen::Index i = 0; i < mat.size(); ++i) fn(mat.data()[i], ParamKind::head);
  };
  visit(m.head.w1);
  visit(m.head.b1);
  visit(m.head.w2);
  visit(m.head.b2);
}

std::vector<double> flatten_parameters(const ModelParams& m);
void assign_parameters(ModelParams& m, std::span<const double> values);

/// Mean loss of one prediction vector.
double sample_loss(Loss loss, const Vector& prediction, const Sample& sample);

struct Gradients {
  double loss = 0.0;  ///< batch mean
  ModelParams grad;   ///< same layout as the model; untrainable betas are zero
};

/// Batch-mean loss and its analytic gradient with respect to every trainable
/// parameter. Throws training_diverged when the loss is not finite.
Gradients model_gradients(const ModelParams& m, const SpectralDecomposition& basis,
                          std::span<const Sample> batch, Loss loss);

double evaluate_loss(const ModelParams& m, const SpectralDecomposition& basis,
                     std::span<const Sample> data, Loss loss);
/// Fraction of samples whose argmax logit equals the label.
double evaluate_accuracy(const ModelParams& m, const SpectralDecomposition& basis,
                         std::span<const Sample> data);

struct TrainConfig {
  double learning_rate = 1e-3;
  int epochs = 100;
  int batch_size = 64;
  std::uint64_t seed = 0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double dropout = 0.0;  ///< applied to the head's hidden layer while training
  Loss loss = Loss::mse;

  void validate() const;
};

struct TrainResult {
  ModelParams best;         ///< parameters at the lowest validation loss
  ModelParams last_finite;  ///< parameters after the last finite epoch
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  int best_epoch = 0;  ///< 1-based
  bool diverged = false;
  std::string diagnostic;
};

/// Adam over all trainable parameters with shuffled mini-batches. Learnable
/// betas are clamped to the overflow guard |beta| ||C|| <= 700.
TrainResult train(const ModelParams& init, const SpectralDecomposition& basis,
                  const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg);

}  // namespace cdnn
