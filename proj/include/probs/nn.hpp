#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "probs/games.hpp"

namespace probs::nn {

/// Network shape or input size does not match what a caller supplied.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A gradient step produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class LayerKind : std::uint8_t { kConv2d, kDense, kLeakyRelu, kTanh };

std::string_view layer_kind_name(LayerKind k);
LayerKind parse_layer_kind(std::string_view name);

inline constexpr float kLeakySlope = 0.01F;

/// One layer of a feed-forward stack. Convolutions are "same"-padded with
/// stride 1 over a channels-last [height][width][channel] tensor; dense layers
/// treat their input as a flat vector.
struct LayerSpec {
  LayerKind kind = LayerKind::kDense;
  int height = 0;
  int width = 0;
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  int in_features = 0;
  int out_features = 0;

  static LayerSpec conv2d(int height, int width, int in_channels, int out_channels, int kernel);
  static LayerSpec dense(int in_features, int out_features);
  static LayerSpec leaky_relu(int size);
  static LayerSpec tanh(int size);

  int input_size() const;
  int output_size() const;
  std::size_t param_count() const;

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Weights of one network with a matching gradient buffer. Per layer the
/// weight block comes first ([ky][kx][in][out] for conv, [in][out] for dense)
/// followed by the bias.
struct ParameterSet {
  std::vector<LayerSpec> layers;
  std::vector<float> weights;
  std::vector<float> grads;

  std::size_t size() const { return weights.size(); }
  int input_size() const { return layers.front().input_size(); }
  int output_size() const { return layers.back().output_size(); }
  std::size_t offset_of(std::size_t layer) const;

  /// Throws ConfigError if layer dims do not chain or sizes disagree.
  void validate() const;

  friend bool operator==(const ParameterSet& a, const ParameterSet& b) {
    return a.layers == b.layers && a.weights == b.weights;
  }
};

std::size_t param_count(std::span<const LayerSpec> layers);

/// He-scaled uniform weights (limit sqrt(6 / fan_in)), zero biases.
ParameterSet init_params(std::vector<LayerSpec> layers, std::uint64_t seed);

enum class NetSize : std::uint8_t { kSmall, kLarge };

NetSize parse_net_size(std::string_view name);
std::string_view net_size_name(NetSize s);

/// Small: two 3x3 convs (16 ch) and two dense layers, roughly 10K weights on
/// Connect Four. Large: three 3x3 convs (32/64/64 ch) and two dense layers,
/// roughly 100K weights. The value head ends in tanh; the q head is linear.
std::vector<LayerSpec> value_net_layers(Variant v, NetSize size);
std::vector<LayerSpec> q_net_layers(Variant v, NetSize size);

/// Single-sample inference. Safe to call concurrently on a const ParameterSet.
void forward(const ParameterSet& p, std::span<const float> input, std::span<float> output);

/// Inputs, targets and a 0/1 mask, each stored row-major with one row per
/// sample. Only masked entries contribute to the loss.
struct Batch {
  int input_size = 0;
  int output_size = 0;
  std::vector<float> inputs;
  std::vector<float> targets;
  std::vector<float> mask;

  Batch() = default;
  Batch(int input_size, int output_size) : input_size(input_size), output_size(output_size) {}

  std::size_t count() const { return output_size == 0 ? 0 : targets.size() / output_size; }
  void add(std::span<const float> input, std::span<const float> target, std::span<const float> m);
  void clear();
};

/// Fills p.grads with the gradient of the masked mean squared error
///   sum(mask * (y - t)^2) / sum(mask)
/// and returns that loss, evaluated before any update.
float compute_gradients(ParameterSet& p, const Batch& batch);

/// Loss only, without touching gradients.
float batch_loss(const ParameterSet& p, const Batch& batch);

enum class OptimizerKind : std::uint8_t { kSgd, kAdam };

OptimizerKind parse_optimizer(std::string_view name);
std::string_view optimizer_name(OptimizerKind k);

/// Plain SGD, or Adam with the usual (0.9, 0.999, 1e-8) constants.
class Optimizer {
 public:
  Optimizer() = default;
  Optimizer(OptimizerKind kind, float lr, std::size_t params);

  void step(ParameterSet& p);

  OptimizerKind kind() const { return kind_; }
  float learning_rate() const { return lr_; }
  std::uint64_t steps() const { return steps_; }

  // Moment buffers, exposed for checkpointing.
  std::vector<float>& first_moment() { return m_; }
  std::vector<float>& second_moment() { return v_; }
  const std::vector<float>& first_moment() const { return m_; }
  const std::vector<float>& second_moment() const { return v_; }
  void set_steps(std::uint64_t t) { steps_ = t; }

 private:
  OptimizerKind kind_ = OptimizerKind::kSgd;
  float lr_ = 0.0F;
  std::uint64_t steps_ = 0;
  std::vector<float> m_;
  std::vector<float> v_;
};

/// One optimizer step on `batch`; returns the pre-step loss. Throws
/// DivergenceError if the loss or any gradient is non-finite.
float train_batch(ParameterSet& p, const Batch& batch, Optimizer& opt);

/// Plain SGD step with learning rate `lr`.
float train_batch(ParameterSet& p, const Batch& batch, float lr);

/// V: board -> scalar in (-1, 1).
class ValueNet {
 public:
  ValueNet() = default;
  explicit ValueNet(ParameterSet params);
  ValueNet(Variant v, NetSize size, std::uint64_t seed);

  float evaluate(const GameState& s) const;
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

 private:
  ParameterSet params_;
};

/// Q: board -> one q-value per column. Entries at invalid columns carry no
/// meaning.
class QNet {
 public:
  QNet() = default;
  explicit QNet(ParameterSet params);
  QNet(Variant v, NetSize size, std::uint64_t seed);

  void evaluate(const GameState& s, std::span<float> out) const;
  std::vector<float> evaluate(const GameState& s) const;
  int actions() const { return params_.output_size(); }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

 private:
  ParameterSet params_;
};

float forward_value(const ValueNet& net, const Encoding& x);
std::vector<float> forward_q(const QNet& net, const Encoding& x);

/// Converts a planar Encoding to the channels-last network input.
std::vector<float> to_network_input(const Encoding& x);

}  // namespace probs::nn
