#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "fedgeo/dense_matrix.hpp"

namespace fedgeo {

// One dense layer: weights are [fan_in x fan_out], so a batch maps as x * W + b.
struct LayerParams {
  DenseMatrix weights;
  std::vector<double> bias;

  std::size_t fan_in() const { return weights.rows(); }
  std::size_t fan_out() const { return weights.cols(); }

  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

// Parameter-shaped buffers (gradients, velocities) share the layer layout.
using ParamBuffers = std::vector<LayerParams>;

// ReLU feedforward network. Every layer except the last applies ReLU; the last
// layer emits logits.
class MlpModel {
 public:
  MlpModel() = default;
  // Validates that shapes chain and that there are at least two layers.
  explicit MlpModel(std::vector<LayerParams> layers);

  std::size_t layer_count() const { return layers_.size(); }
  std::size_t hidden_layer_count() const { return layers_.empty() ? 0 : layers_.size() - 1; }
  std::size_t input_width() const { return layers_.front().fan_in(); }
  std::size_t output_width() const { return layers_.back().fan_out(); }
  std::vector<std::size_t> layer_sizes() const;
  std::size_t parameter_count() const;

  const std::vector<LayerParams>& layers() const { return layers_; }
  std::vector<LayerParams>& layers() { return layers_; }
  const LayerParams& layer(std::size_t l) const { return layers_[l]; }
  LayerParams& layer(std::size_t l) { return layers_[l]; }

  bool all_finite() const;
  bool same_architecture(const MlpModel& other) const;

  friend bool operator==(const MlpModel&, const MlpModel&) = default;

 private:
  std::vector<LayerParams> layers_;
};

struct ForwardTrace {
  std::vector<DenseMatrix> preactivations;  // one per layer, recorded before ReLU
  DenseMatrix output;                       // logits, identical to the last preactivation
};

struct SgdState {
  double learning_rate = 0.05;
  double momentum = 0.9;
  ParamBuffers velocity;
};

struct LossAndGradients {
  double loss = 0.0;
  ParamBuffers grads;
};

// Glorot-uniform weights, zero biases. Requires at least three sizes, none zero.
MlpModel init_model(std::span<const std::size_t> layer_sizes, std::uint64_t seed);

ForwardTrace forward(const MlpModel& model, const DenseMatrix& inputs);

// Mean softmax cross-entropy over the batch and its gradient by backprop.
LossAndGradients loss_and_gradients(const MlpModel& model, const DenseMatrix& inputs,
                                    std::span<const int> labels);

// Mean softmax cross-entropy only.
double loss(const MlpModel& model, const DenseMatrix& inputs, std::span<const int> labels);

// Fraction of rows whose argmax logit equals the label.
double accuracy(const MlpModel& model, const DenseMatrix& inputs, std::span<const int> labels);

// Zero-filled buffers shaped like the model.
ParamBuffers zeros_like(const MlpModel& model);

SgdState make_sgd_state(const MlpModel& model, double learning_rate, double momentum);

// Heavy-ball momentum: v <- momentum * v + g; theta <- theta - lr * v.
void sgd_step(MlpModel& model, const ParamBuffers& grads, SgdState& state);

}  // namespace fedgeo
