#include "cdnn/network.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "cdnn/error.hpp"

namespace cdnn {
namespace {

[[noreturn]] void bad_config(const std::string& what) {
  throw Error(ErrorCode::invalid_config, what);
}

double activate_derivative(Activation a, double u, double y) noexcept {
  switch (a) {
    case Activation::identity: return 1.0;
    case Activation::tanh: return 1.0 - y * y;
    case Activation::relu: return u > 0.0 ? 1.0 : 0.0;
    case Activation::elu: return u > 0.0 ? 1.0 : y + 1.0;
  }
  return 1.0;
}

Matrix activate_all(Activation a, const Matrix& u) {
  return u.unaryExpr([a](double v) { return activate(a, v); });
}

// Density eigenvalues per scale plus filter polynomial values per (scale, channel).
struct LayerSpectra {
  std::vector<Vector> rho;       // [scale] -> m
  std::vector<double> mean;      // [scale] -> E_q[lambda]
  std::vector<Vector> poly;      // [scale * f_in + channel] -> m
  std::vector<Vector> poly_der;  // same layout, d poly / d rho
};

LayerSpectra layer_spectra(const LayerParams& p, const SpectralDecomposition& basis) {
  LayerSpectra s;
  const Eigen::Index m = basis.dim();
  for (int j = 0; j < p.f_out; ++j) {
    const DensityOperator rho(p.betas[static_cast<std::size_t>(j)], basis);
    s.rho.push_back(rho.density_eigenvalues());
    s.mean.push_back(rho.mean_energy());
    for (int g = 0; g < p.f_in; ++g) {
      const FilterSpec f = p.filter(j, g);
      Vector v(m), d(m);
      for (Eigen::Index i = 0; i < m; ++i) {
        v(i) = filter_polynomial(f, s.rho.back()(i));
        d(i) = filter_polynomial_derivative(f, s.rho.back()(i));
      }
      s.poly.push_back(std::move(v));
      s.poly_der.push_back(std::move(d));
    }
  }
  return s;
}

struct LayerCache {
  LayerSpectra spectra;
  std::vector<Matrix> input_coords;  // [channel] V^T x_g, m x T
  std::vector<Matrix> pre;           // [scale] u_j
  std::vector<Matrix> post;          // [scale] sigma(u_j)
};

std::vector<Matrix> layer_apply(const LayerParams& p, const SpectralDecomposition& basis,
                                const LayerSpectra& spectra, const std::vector<Matrix>& inputs,
                                LayerCache* cache) {
  const Matrix& v = basis.eigenvectors();
  std::vector<Matrix> coords;
  coords.reserve(inputs.size());
  for (const auto& x : inputs) coords.push_back(v.transpose() * x);

  std::vector<Matrix> pre, post;
  for (int j = 0; j < p.f_out; ++j) {
    Matrix acc = Matrix::Zero(coords.front().rows(), coords.front().cols());
    for (int g = 0; g < p.f_in; ++g) {
      acc += spectra.poly[static_cast<std::size_t>(j * p.f_in + g)].asDiagonal() *
             coords[static_cast<std::size_t>(g)];
    }
    Matrix u = v * acc;
    post.push_back(activate_all(p.activation, u));
    pre.push_back(std::move(u));
  }

  std::vector<Matrix> out;
  if (p.aggregation == Aggregation::concatenate) {
    out = post;
  } else {
    Matrix total = Matrix::Zero(post.front().rows(), post.front().cols());
    for (const auto& y : post) total += y;
    if (p.aggregation == Aggregation::mean) total /= static_cast<double>(p.f_out);
    out.push_back(std::move(total));
  }
  if (cache) {
    cache->input_coords = std::move(coords);
    cache->pre = std::move(pre);
    cache->post = std::move(post);
  }
  return out;
}

// Channel-major, then node, then time.
Vector flatten_channels(const std::vector<Matrix>& channels) {
  const Eigen::Index m = channels.front().rows();
  const Eigen::Index t = channels.front().cols();
  Vector flat(static_cast<Eigen::Index>(channels.size()) * m * t);
  Eigen::Index k = 0;
  for (const auto& c : channels)
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index s = 0; s < t; ++s) flat(k++) = c(i, s);
  return flat;
}

std::vector<Matrix> unflatten_channels(const Vector& flat, std::size_t n, Eigen::Index m,
                                       Eigen::Index t) {
  std::vector<Matrix> channels(n, Matrix(m, t));
  Eigen::Index k = 0;
  for (auto& c : channels)
    for (Eigen::Index i = 0; i < m; ++i)
      for (Eigen::Index s = 0; s < t; ++s) c(i, s) = flat(k++);
  return channels;
}

void check_signal(const ModelParams& m, const SpectralDecomposition& basis, const Matrix& x) {
  if (basis.dim() != m.dim || x.rows() != m.dim || x.cols() != m.time_steps) {
    std::ostringstream msg;
    msg << "model expects " << m.dim << "x" << m.time_steps << " signals on a dim-" << m.dim
        << " covariance; got " << x.rows() << "x" << x.cols() << " and dim " << basis.dim();
    throw Error(ErrorCode::dimension_mismatch, msg.str());
  }
}

// d loss / d prediction for one sample, plus the loss value.
double loss_and_gradient(Loss loss, const Vector& pred, const Sample& s, Vector* grad) {
  const auto n = static_cast<double>(pred.size());
  switch (loss) {
    case Loss::mse: {
      const Vector diff = pred - s.target;
      if (grad) *grad = 2.0 * diff / n;
      return diff.squaredNorm() / n;
    }
    case Loss::mae: {
      const Vector diff = pred - s.target;
      if (grad) *grad = diff.unaryExpr([n](double d) { return (d > 0.0) - (d < 0.0) + 0.0; }) / n;
      return diff.cwiseAbs().sum() / n;
    }
    case Loss::cross_entropy: {
      if (s.label < 0 || s.label >= pred.size()) {
        throw Error(ErrorCode::invalid_argument, "cross_entropy: label out of range");
      }
      const double top = pred.maxCoeff();
      const Vector e = (pred.array() - top).exp().matrix();
      const double log_sum = top + std::log(e.sum());
      if (grad) {
        *grad = e / e.sum();
        (*grad)(s.label) -= 1.0;
      }
      return log_sum - pred(s.label);
    }
  }
  return 0.0;
}

void check_target(Loss loss, const ModelParams& m, const Sample& s) {
  if (loss != Loss::cross_entropy && s.target.size() != m.output_dim()) {
    throw Error(ErrorCode::dimension_mismatch,
                "target has length " + std::to_string(s.target.size()) + ", model outputs " +
                    std::to_string(m.output_dim()));
  }
}

ModelParams zeros_like(const ModelParams& m) {
  ModelParams z = m;
  for (auto& layer : z.layers) {
    std::fill(layer.coeffs.begin(), layer.coeffs.end(), 0.0);
    std::fill(layer.betas.begin(), layer.betas.end(), 0.0);
  }
  z.head.w1.setZero();
  z.head.b1.setZero();
  z.head.w2.setZero();
  z.head.b2.setZero();
  return z;
}

struct Evaluation {
  double loss = 0.0;
  std::optional<ModelParams> grad;
};

// Shared forward/backward pass. `dropout_rng` enables inverted dropout on the
// head's hidden layer.
Evaluation evaluate(const ModelParams& m, const SpectralDecomposition& basis,
                    std::span<const Sample> batch, Loss loss, bool want_grad, double dropout,
                    Rng* dropout_rng) {
  if (batch.empty()) throw Error(ErrorCode::invalid_argument, "empty batch");
  std::vector<LayerSpectra> spectra;
  for (const auto& layer : m.layers) spectra.push_back(layer_spectra(layer, basis));

  Evaluation ev;
  if (want_grad) ev.grad = zeros_like(m);
  const Matrix& v = basis.eigenvectors();
  const Vector& lambda = basis.eigenvalues();
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  std::bernoulli_distribution keep(1.0 - dropout);

  for (const Sample& s : batch) {
    check_signal(m, basis, s.signal);
    check_target(loss, m, s);
    std::vector<LayerCache> caches(m.layers.size());
    std::vector<Matrix> channels{s.signal};
    for (std::size_t l = 0; l < m.layers.size(); ++l) {
      caches[l].spectra = spectra[l];
      channels = layer_apply(m.layers[l], basis, spectra[l], channels, want_grad ? &caches[l] : nullptr);
    }
    const Vector flat = flatten_channels(channels);
    const Vector hidden_pre = m.head.w1 * flat + m.head.b1;
    Vector hidden = hidden_pre.unaryExpr([&](double u) { return activate(m.head.hidden_activation, u); });
    Vector mask = Vector::Ones(hidden.size());
    if (dropout_rng && dropout > 0.0) {
      for (Eigen::Index i = 0; i < mask.size(); ++i) mask(i) = keep(*dropout_rng) ? 1.0 / (1.0 - dropout) : 0.0;
    }
    const Vector hidden_out = hidden.cwiseProduct(mask);
    const Vector pred = m.head.w2 * hidden_out + m.head.b2;

    Vector dpred;
    const double l = loss_and_gradient(loss, pred, s, want_grad ? &dpred : nullptr);
    if (!std::isfinite(l)) {
      throw Error(ErrorCode::training_diverged, "non-finite loss " + std::to_string(l));
    }
    ev.loss += l * inv_batch;
    if (!want_grad) continue;

    ModelParams& g = *ev.grad;
    dpred *= inv_batch;
    g.head.w2 += dpred * hidden_out.transpose();
    g.head.b2 += dpred;
    Vector dhidden = (m.head.w2.transpose() * dpred).cwiseProduct(mask);
    for (Eigen::Index i = 0; i < dhidden.size(); ++i) {
      dhidden(i) *= activate_derivative(m.head.hidden_activation, hidden_pre(i), hidden(i));
    }
    g.head.w1 += dhidden * flat.transpose();
    g.head.b1 += dhidden;
    const Vector dflat = m.head.w1.transpose() * dhidden;
    std::vector<Matrix> dchannels =
        unflatten_channels(dflat, channels.size(), m.dim, m.time_steps);

    for (std::size_t li = m.layers.size(); li-- > 0;) {
      const LayerParams& p = m.layers[li];
      LayerParams& gp = g.layers[li];
      const LayerCache& c = caches[li];
      std::vector<Matrix> dpost(static_cast<std::size_t>(p.f_out));
      for (int j = 0; j < p.f_out; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        switch (p.aggregation) {
          case Aggregation::concatenate: dpost[ju] = dchannels[ju]; break;
          case Aggregation::sum: dpost[ju] = dchannels[0]; break;
          case Aggregation::mean: dpost[ju] = dchannels[0] / static_cast<double>(p.f_out); break;
        }
      }
      std::vector<Matrix> dcoords(static_cast<std::size_t>(p.f_in),
                                  Matrix::Zero(m.dim, m.time_steps));
      for (int j = 0; j < p.f_out; ++j) {
        const auto ju = static_cast<std::size_t>(j);
        Matrix du = dpost[ju];
        for (Eigen::Index i = 0; i < du.size(); ++i) {
          du.data()[i] *= activate_derivative(p.activation, c.pre[ju].data()[i], c.post[ju].data()[i]);
        }
        const Matrix dcoord_u = v.transpose() * du;
        const Vector& rho = c.spectra.rho[ju];
        Vector drho = Vector::Zero(m.dim);
        for (int gi = 0; gi < p.f_in; ++gi) {
          const auto gu = static_cast<std::size_t>(gi);
          const std::size_t pj = ju * static_cast<std::size_t>(p.f_in) + gu;
          // a_i = sum_t dU~(i, t) X~(i, t)
          const Vector a = dcoord_u.cwiseProduct(c.input_coords[gu]).rowwise().sum();
          Vector power = Vector::Ones(m.dim);
          for (int k = 0; k <= p.order; ++k) {
            if (k > 0) power = power.cwiseProduct(rho);
            if (k == 0 && p.skip_k0) continue;
            gp.coeff(j, gi, k) += a.dot(power);
          }
          drho += a.cwiseProduct(c.spectra.poly_der[pj]);
          dcoords[gu] += c.spectra.poly[pj].asDiagonal() * dcoord_u;
        }
        if (p.betas_learnable) {
          // d rho_i / d beta = rho_i (E_q[lambda] - lambda_i)
          const Vector drho_dbeta = rho.cwiseProduct((c.spectra.mean[ju] - lambda.array()).matrix());
          gp.betas[ju] += drho.dot(drho_dbeta);
        }
      }
      if (li > 0) {
        dchannels.clear();
        for (const auto& dc : dcoords) dchannels.push_back(v * dc);
      }
    }
  }
  return ev;
}

void clamp_betas(ModelParams& m, double norm) {
  if (!(norm > 0.0)) return;
  const double limit = kMaxBetaNormProduct / norm;
  for (auto& layer : m.layers) {
    for (auto& b : layer.betas) b = std::clamp(b, -limit, limit);
  }
}

}  // namespace

Activation parse_activation(std::string_view name) {
  if (name == "identity") return Activation::identity;
  if (name == "tanh") return Activation::tanh;
  if (name == "relu") return Activation::relu;
  if (name == "elu") return Activation::elu;
  bad_config("unknown activation '" + std::string(name) + "'");
}

Aggregation parse_aggregation(std::string_view name) {
  if (name == "concatenate") return Aggregation::concatenate;
  if (name == "sum") return Aggregation::sum;
  if (name == "mean") return Aggregation::mean;
  bad_config("unknown aggregation '" + std::string(name) + "'");
}

Task parse_task(std::string_view name) {
  if (name == "regression") return Task::regression;
  if (name == "classification") return Task::classification;
  bad_config("unknown task '" + std::string(name) + "'");
}

Loss parse_loss(std::string_view name) {
  if (name == "mse") return Loss::mse;
  if (name == "mae") return Loss::mae;
  if (name == "cross_entropy") return Loss::cross_entropy;
  bad_config("unknown loss '" + std::string(name) + "'");
}

std::string_view to_string(Activation a) noexcept {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::elu: return "elu";
  }
  return "identity";
}

std::string_view to_string(Aggregation a) noexcept {
  switch (a) {
    case Aggregation::concatenate: return "concatenate";
    case Aggregation::sum: return "sum";
    case Aggregation::mean: return "mean";
  }
  return "concatenate";
}

std::string_view to_string(Task t) noexcept {
  return t == Task::classification ? "classification" : "regression";
}

std::string_view to_string(Loss l) noexcept {
  switch (l) {
    case Loss::mse: return "mse";
    case Loss::mae: return "mae";
    case Loss::cross_entropy: return "cross_entropy";
  }
  return "mse";
}

double activate(Activation a, double u) noexcept {
  switch (a) {
    case Activation::identity: return u;
    case Activation::tanh: return std::tanh(u);
    case Activation::relu: return u > 0.0 ? u : 0.0;
    case Activation::elu: return u > 0.0 ? u : std::expm1(u);
  }
  return u;
}

Vector perceptron_forward(const FilterSpec& f, const DensityOperator& rho, Activation activation,
                          const Vector& x) {
  return filter_apply(f, rho, x).unaryExpr([activation](double u) { return activate(activation, u); });
}

FilterSpec LayerParams::filter(int scale, int channel) const {
  FilterSpec f;
  f.coeffs.assign(coeffs.begin() + static_cast<std::ptrdiff_t>(coeff_index(scale, channel, 0)),
                  coeffs.begin() + static_cast<std::ptrdiff_t>(coeff_index(scale, channel, 0) +
                                                               static_cast<std::size_t>(taps())));
  f.beta = betas[static_cast<std::size_t>(scale)];
  f.skip_k0 = skip_k0;
  return f;
}

void LayerParams::validate() const {
  if (f_in < 1 || f_out < 1 || order < 0) bad_config("layer needs f_in >= 1, f_out >= 1, order >= 0");
  if (coeffs.size() != static_cast<std::size_t>(f_out * f_in * taps())) {
    bad_config("layer has " + std::to_string(coeffs.size()) + " coefficients, expected " +
               std::to_string(f_out * f_in * taps()));
  }
  if (betas.size() != static_cast<std::size_t>(f_out)) {
    bad_config("layer has " + std::to_string(betas.size()) + " betas, expected f_out = " +
               std::to_string(f_out));
  }
  for (double h : coeffs) if (!std::isfinite(h)) bad_config("non-finite filter coefficient");
  for (double b : betas) if (!std::isfinite(b)) bad_config("non-finite beta");
}

std::vector<Vector> layer_forward(const LayerParams& p, std::span<const DensityOperator> densities,
                                  std::span<const Vector> inputs) {
  p.validate();
  if (densities.size() != static_cast<std::size_t>(p.f_out)) {
    throw Error(ErrorCode::dimension_mismatch, "layer_forward: need one density per scale");
  }
  if (inputs.size() != static_cast<std::size_t>(p.f_in)) {
    throw Error(ErrorCode::dimension_mismatch,
                "layer_forward: got " + std::to_string(inputs.size()) + " input channels, expected " +
                    std::to_string(p.f_in));
  }
  std::vector<Vector> post;
  for (int j = 0; j < p.f_out; ++j) {
    const DensityOperator& rho = densities[static_cast<std::size_t>(j)];
    Vector acc = Vector::Zero(rho.dim());
    for (int g = 0; g < p.f_in; ++g) {
      FilterSpec f = p.filter(j, g);
      f.beta = rho.beta();
      acc += filter_apply(f, rho, inputs[static_cast<std::size_t>(g)]);
    }
    post.push_back(acc.unaryExpr([&](double u) { return activate(p.activation, u); }));
  }
  if (p.aggregation == Aggregation::concatenate) return post;
  Vector total = Vector::Zero(post.front().size());
  for (const auto& y : post) total += y;
  if (p.aggregation == Aggregation::mean) total /= static_cast<double>(p.f_out);
  return {total};
}

Eigen::Index ModelParams::flat_dim() const {
  const Eigen::Index channels = layers.empty() ? 1 : layers.back().output_channels();
  return channels * dim * time_steps;
}

void ModelParams::validate() const {
  if (dim < 1 || time_steps < 1) bad_config("model needs dim >= 1 and time_steps >= 1");
  int channels = 1;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    layers[l].validate();
    if (layers[l].f_in != channels) {
      bad_config("layer " + std::to_string(l) + " expects f_in = " +
                 std::to_string(layers[l].f_in) + " but receives " + std::to_string(channels) +
                 " channels");
    }
    channels = layers[l].output_channels();
  }
  if (head.w1.cols() != flat_dim() || head.b1.size() != head.w1.rows() ||
      head.w2.cols() != head.w1.rows() || head.b2.size() != head.w2.rows() || head.w2.rows() < 1) {
    bad_config("head dimensions do not chain with the flattened layer output");
  }
  if (!head.w1.allFinite() || !head.b1.allFinite() || !head.w2.allFinite() || !head.b2.allFinite()) {
    bad_config("non-finite head weights");
  }
}

ModelParams init_model(const ModelSpec& spec, Eigen::Index dim, Eigen::Index time_steps,
                       Eigen::Index output_dim, std::uint64_t seed) {
  if (spec.num_layers < 0 || spec.order < 0 || spec.hidden_dim < 1 || spec.betas.empty()) {
    bad_config("model spec needs num_layers >= 0, order >= 0, hidden_dim >= 1 and betas");
  }
  Rng rng = make_rng(seed, 0x6d6f64656cULL);
  ModelParams m;
  m.task = spec.task;
  m.dim = dim;
  m.time_steps = time_steps;
  int channels = 1;
  for (int l = 0; l < spec.num_layers; ++l) {
    LayerParams p;
    p.f_in = channels;
    p.f_out = static_cast<int>(spec.betas.size());
    p.order = spec.order;
    p.betas = spec.betas;
    p.betas_learnable = spec.betas_learnable;
    p.skip_k0 = spec.skip_k0;
    p.aggregation = spec.aggregation;
    p.activation = spec.activation;
    const double scale = 1.0 / std::sqrt(static_cast<double>(p.f_in * p.taps()));
    std::normal_distribution<double> normal(0.0, scale);
    p.coeffs.resize(static_cast<std::size_t>(p.f_out * p.f_in * p.taps()));
    for (auto& h : p.coeffs) h = normal(rng);
    channels = p.output_channels();
    m.layers.push_back(std::move(p));
  }
  auto xavier = [&](Eigen::Index rows, Eigen::Index cols) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> unif(-limit, limit);
    Matrix w(rows, cols);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = unif(rng);
    return w;
  };
  m.head.hidden_activation = spec.head_activation;
  m.head.w1 = xavier(spec.hidden_dim, m.flat_dim());
  m.head.b1 = Vector::Zero(spec.hidden_dim);
  m.head.w2 = xavier(output_dim, spec.hidden_dim);
  m.head.b2 = Vector::Zero(output_dim);
  m.validate();
  return m;
}

Vector model_forward(const ModelParams& m, const SpectralDecomposition& basis, const Matrix& x) {
  check_signal(m, basis, x);
  std::vector<Matrix> channels{x};
  for (const auto& layer : m.layers) {
    channels = layer_apply(layer, basis, layer_spectra(layer, basis), channels, nullptr);
  }
  const Vector flat = flatten_channels(channels);
  const Vector hidden = (m.head.w1 * flat + m.head.b1)
                            .unaryExpr([&](double u) { return activate(m.head.hidden_activation, u); });
  return m.head.w2 * hidden + m.head.b2;
}

Vector model_forward(const ModelParams& m, const CovarianceMatrix& c, const Matrix& x) {
  return model_forward(m, eigh(c.matrix()), x);
}

std::vector<std::vector<Matrix>> model_layer_outputs(const ModelParams& m,
                                                     const SpectralDecomposition& basis,
                                                     const Matrix& x) {
  check_signal(m, basis, x);
  std::vector<std::vector<Matrix>> outputs;
  std::vector<Matrix> channels{x};
  for (const auto& layer : m.layers) {
    channels = layer_apply(layer, basis, layer_spectra(layer, basis), channels, nullptr);
    outputs.push_back(channels);
  }
  return outputs;
}

std::vector<double> flatten_parameters(const ModelParams& m) {
  std::vector<double> out;
  for_each_parameter(m, [&](const double& v, ParamKind) { out.push_back(v); });
  return out;
}

void assign_parameters(ModelParams& m, std::span<const double> values) {
  std::size_t i = 0;
  for_each_parameter(m, [&](double& v, ParamKind) {
    if (i >= values.size()) throw Error(ErrorCode::dimension_mismatch, "too few parameter values");
    v = values[i++];
  });
  if (i != values.size()) throw Error(ErrorCode::dimension_mismatch, "too many parameter values");
}

double sample_loss(Loss loss, const Vector& prediction, const Sample& sample) {
  return loss_and_gradient(loss, prediction, sample, nullptr);
}

Gradients model_gradients(const ModelParams& m, const SpectralDecomposition& basis,
                          std::span<const Sample> batch, Loss loss) {
  Evaluation ev = evaluate(m, basis, batch, loss, true, 0.0, nullptr);
  return {ev.loss, std::move(*ev.grad)};
}

double evaluate_loss(const ModelParams& m, const SpectralDecomposition& basis,
                     std::span<const Sample> data, Loss loss) {
  return evaluate(m, basis, data, loss, false, 0.0, nullptr).loss;
}

double evaluate_accuracy(const ModelParams& m, const SpectralDecomposition& basis,
                         std::span<const Sample> data) {
  if (data.empty()) return 0.0;
  std::size_t correct = 0;
  for (const auto& s : data) {
    const Vector logits = model_forward(m, basis, s.signal);
    Eigen::Index arg = 0;
    logits.maxCoeff(&arg);
    if (arg == s.label) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) bad_config("learning_rate must be >= 0");
  if (epochs < 1) bad_config("epochs must be >= 1");
  if (batch_size < 1) bad_config("batch_size must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    bad_config("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) bad_config("adam_eps must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) bad_config("dropout must lie in [0, 1)");
}

TrainResult train(const ModelParams& init, const SpectralDecomposition& basis,
                  const Dataset& train_set, const Dataset& val_set, const TrainConfig& cfg) {
  cfg.validate();
  init.validate();
  if (train_set.empty()) throw Error(ErrorCode::invalid_argument, "train: empty training set");

  TrainResult result;
  ModelParams model = init;
  result.best = init;
  result.last_finite = init;
  const double norm = basis.spectral_radius();

  std::vector<double> params = flatten_parameters(model);
  std::vector<double> first(params.size(), 0.0), second(params.size(), 0.0);
  Rng shuffle_rng = make_rng(cfg.seed, 1);
  Rng dropout_rng = make_rng(cfg.seed, 2);
  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  double best_val = std::numeric_limits<double>::infinity();
  long step = 0;

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    try {
      for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
        const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
        Dataset batch;
        for (std::size_t i = start; i < stop; ++i) batch.push_back(train_set[order[i]]);
        Evaluation ev = evaluate(model, basis, batch, cfg.loss, true, cfg.dropout,
                                 cfg.dropout > 0.0 ? &dropout_rng : nullptr);
        epoch_loss += ev.loss * static_cast<double>(stop - start);
        const std::vector<double> grad = flatten_parameters(*ev.grad);
        ++step;
        const double c1 = 1.0 - std::pow(cfg.adam_beta1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(cfg.adam_beta2, static_cast<double>(step));
        for (std::size_t i = 0; i < params.size(); ++i) {
          first[i] = cfg.adam_beta1 * first[i] + (1.0 - cfg.adam_beta1) * grad[i];
          second[i] = cfg.adam_beta2 * second[i] + (1.0 - cfg.adam_beta2) * grad[i] * grad[i];
          params[i] -= cfg.learning_rate * (first[i] / c1) / (std::sqrt(second[i] / c2) + cfg.adam_eps);
        }
        assign_parameters(model, params);
        clamp_betas(model, norm);
        params = flatten_parameters(model);
      }
      epoch_loss /= static_cast<double>(train_set.size());
      const double val = val_set.empty() ? evaluate_loss(model, basis, train_set, cfg.loss)
                                         : evaluate_loss(model, basis, val_set, cfg.loss);
      if (!std::isfinite(epoch_loss) || !std::isfinite(val)) {
        throw Error(ErrorCode::training_diverged, "non-finite epoch loss");
      }
      result.train_loss.push_back(epoch_loss);
      result.val_loss.push_back(val);
      result.last_finite = model;
      if (val < best_val) {
        best_val = val;
        result.best = model;
        result.best_epoch = epoch;
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::training_diverged) throw;
      result.diverged = true;
      result.diagnostic = "epoch " + std::to_string(epoch) + ": " + e.what();
      break;
    }
  }
  return result;
}

}  // namespace cdnn
