#include "fedgeo/nn.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace fedgeo {

namespace {

void check_shapes_match(const ParamBuffers& a, const ParamBuffers& b, const char* what) {
  if (a.size() != b.size()) {
    throw std::invalid_argument(std::string(what) + ": layer count mismatch");
  }
  for (std::size_t l = 0; l < a.size(); ++l) {
    if (a[l].weights.rows() != b[l].weights.rows() || a[l].weights.cols() != b[l].weights.cols() ||
        a[l].bias.size() != b[l].bias.size()) {
      throw std::invalid_argument(std::string(what) + ": shape mismatch at layer " +
                                  std::to_string(l));
    }
  }
}

void add_bias_rows(DenseMatrix& z, const std::vector<double>& bias) {
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto r = z.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) r[j] += bias[j];
  }
}

DenseMatrix relu(const DenseMatrix& z) {
  DenseMatrix h = z;
  for (double& v : h.data()) v = v > 0.0 ? v : 0.0;
  return h;
}

void check_labels(std::span<const int> labels, std::size_t rows, std::size_t n_classes) {
  if (labels.size() != rows) {
    throw std::invalid_argument("label count " + std::to_string(labels.size()) +
                                " != batch size " + std::to_string(rows));
  }
  if (rows == 0) throw std::invalid_argument("empty batch");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= n_classes) {
      throw std::invalid_argument("label " + std::to_string(y) + " out of range [0, " +
                                  std::to_string(n_classes) + ")");
    }
  }
}

// Row-wise softmax probabilities and the mean cross-entropy.
double softmax_xent(const DenseMatrix& logits, std::span<const int> labels, DenseMatrix* probs) {
  double total = 0.0;
  if (probs) *probs = DenseMatrix(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto z = logits.row(i);
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - zmax);
    const double log_sum = std::log(sum) + zmax;
    total += log_sum - z[static_cast<std::size_t>(labels[i])];
    if (probs) {
      auto p = probs->row(i);
      for (std::size_t j = 0; j < z.size(); ++j) p[j] = std::exp(z[j] - log_sum);
    }
  }
  return total / static_cast<double>(logits.rows());
}

}  // namespace

MlpModel::MlpModel(std::vector<LayerParams> layers) : layers_(std::move(layers)) {
  if (layers_.size() < 2) {
    throw std::invalid_argument("MlpModel needs at least one hidden layer and an output layer");
  }
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    if (layers_[l].bias.size() != layers_[l].fan_out()) {
      throw std::invalid_argument("bias length mismatch at layer " + std::to_string(l));
    }
    if (l + 1 < layers_.size() && layers_[l].fan_out() != layers_[l + 1].fan_in()) {
      throw std::invalid_argument("layer " + std::to_string(l) + " fan_out does not chain");
    }
  }
}

std::vector<std::size_t> MlpModel::layer_sizes() const {
  std::vector<std::size_t> sizes;
  if (layers_.empty()) return sizes;
  sizes.push_back(layers_.front().fan_in());
  for (const auto& layer : layers_) sizes.push_back(layer.fan_out());
  return sizes;
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += layer.weights.size() + layer.bias.size();
  return n;
}

bool MlpModel::all_finite() const {
  for (const auto& layer : layers_) {
    if (!layer.weights.all_finite()) return false;
    for (double b : layer.bias) {
      if (!std::isfinite(b)) return false;
    }
  }
  return true;
}

bool MlpModel::same_architecture(const MlpModel& other) const {
  return layer_sizes() == other.layer_sizes();
}

MlpModel init_model(std::span<const std::size_t> layer_sizes, std::uint64_t seed) {
  if (layer_sizes.size() < 3) {
    throw std::invalid_argument("init_model: need at least 3 layer sizes (input, hidden, output)");
  }
  for (std::size_t s : layer_sizes) {
    if (s == 0) throw std::invalid_argument("init_model: layer size 0");
  }
  std::mt19937_64 rng(seed);
  std::vector<LayerParams> layers;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const std::size_t fan_in = layer_sizes[l];
    const std::size_t fan_out = layer_sizes[l + 1];
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    LayerParams p{DenseMatrix(fan_in, fan_out), std::vector<double>(fan_out, 0.0)};
    for (double& w : p.weights.data()) {
      do {
        w = dist(rng);
      } while (w == -bound);
    }
    layers.push_back(std::move(p));
  }
  return MlpModel(std::move(layers));
}

ForwardTrace forward(const MlpModel& model, const DenseMatrix& inputs) {
  if (inputs.cols() != model.input_width()) {
    throw std::invalid_argument("forward: input width " + std::to_string(inputs.cols()) +
                                " != model input width " + std::to_string(model.input_width()));
  }
  ForwardTrace trace;
  trace.preactivations.reserve(model.layer_count());
  DenseMatrix h = inputs;
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    const auto& layer = model.layer(l);
    DenseMatrix z = matmul(h, layer.weights);
    add_bias_rows(z, layer.bias);
    const bool is_output = l + 1 == model.layer_count();
    if (!is_output) h = relu(z);
    trace.preactivations.push_back(std::move(z));
  }
  trace.output = trace.preactivations.back();
  return trace;
}

LossAndGradients loss_and_gradients(const MlpModel& model, const DenseMatrix& inputs,
                                    std::span<const int> labels) {
  check_labels(labels, inputs.rows(), model.output_width());
  const ForwardTrace trace = forward(model, inputs);
  const std::size_t batch = inputs.rows();
  const std::size_t n_layers = model.layer_count();

  LossAndGradients out;
  DenseMatrix delta;
  out.loss = softmax_xent(trace.output, labels, &delta);
  const double inv_batch = 1.0 / static_cast<double>(batch);
  for (std::size_t i = 0; i < batch; ++i) {
    delta(i, static_cast<std::size_t>(labels[i])) -= 1.0;
  }
  for (double& v : delta.data()) v *= inv_batch;

  out.grads.resize(n_layers);
  for (std::size_t l = n_layers; l-- > 0;) {
    const DenseMatrix layer_input = l == 0 ? inputs : relu(trace.preactivations[l - 1]);
    auto& g = out.grads[l];
    g.weights = matmul_at_b(layer_input, delta);
    g.bias.assign(delta.cols(), 0.0);
    for (std::size_t i = 0; i < batch; ++i) {
      auto r = delta.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) g.bias[j] += r[j];
    }
    if (l == 0) break;
    DenseMatrix upstream = matmul_a_bt(delta, model.layer(l).weights);
    const DenseMatrix& z = trace.preactivations[l - 1];
    for (std::size_t k = 0; k < upstream.size(); ++k) {
      if (!(z.data()[k] > 0.0)) upstream.data()[k] = 0.0;
    }
    delta = std::move(upstream);
  }
  return out;
}

double loss(const MlpModel& model, const DenseMatrix& inputs, std::span<const int> labels) {
  check_labels(labels, inputs.rows(), model.output_width());
  return softmax_xent(forward(model, inputs).output, labels, nullptr);
}

double accuracy(const MlpModel& model, const DenseMatrix& inputs, std::span<const int> labels) {
  if (labels.size() != inputs.rows()) throw std::invalid_argument("accuracy: label count mismatch");
  if (inputs.rows() == 0) return 0.0;
  const DenseMatrix logits = forward(model, inputs).output;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto r = logits.row(i);
    const auto best = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
    if (best == labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(logits.rows());
}

ParamBuffers zeros_like(const MlpModel& model) {
  ParamBuffers buffers;
  buffers.reserve(model.layer_count());
  for (const auto& layer : model.layers()) {
    buffers.push_back(LayerParams{DenseMatrix(layer.fan_in(), layer.fan_out()),
                                  std::vector<double>(layer.fan_out(), 0.0)});
  }
  return buffers;
}

SgdState make_sgd_state(const MlpModel& model, double learning_rate, double momentum) {
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning rate must be >= 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in [0,1)");
  return SgdState{learning_rate, momentum, zeros_like(model)};
}

void sgd_step(MlpModel& model, const ParamBuffers& grads, SgdState& state) {
  check_shapes_match(model.layers(), grads, "sgd_step(grads)");
  check_shapes_match(model.layers(), state.velocity, "sgd_step(velocity)");
  const double mu = state.momentum;
  const double lr = state.learning_rate;
  for (std::size_t l = 0; l < model.layer_count(); ++l) {
    auto& w = model.layer(l).weights.data();
    auto& vw = state.velocity[l].weights.data();
    const auto& gw = grads[l].weights.data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      vw[k] = mu * vw[k] + gw[k];
      w[k] -= lr * vw[k];
    }
    auto& b = model.layer(l).bias;
    auto& vb = state.velocity[l].bias;
    const auto& gb = grads[l].bias;
    for (std::size_t k = 0; k < b.size(); ++k) {
      vb[k] = mu * vb[k] + gb[k];
      b[k] -= lr * vb[k];
    }
  }
}

}  // namespace fedgeo
