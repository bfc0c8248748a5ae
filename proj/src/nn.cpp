#include "probs/nn.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace probs::nn {
namespace {

constexpr float kTanhBound = 0.99999994F;

void conv_forward(const LayerSpec& l, const float* w, const float* in, float* out) {
  const int h = l.height;
  const int wd = l.width;
  const int ci = l.in_channels;
  const int co = l.out_channels;
  const int k = l.kernel;
  const int pad = k / 2;
  const float* bias = w + static_cast<std::size_t>(k) * k * ci * co;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < wd; ++x) {
      float* o = out + (y * wd + x) * co;
      std::copy(bias, bias + co, o);
      for (int ky = 0; ky < k; ++ky) {
        const int iy = y + ky - pad;
        if (iy < 0 || iy >= h) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = x + kx - pad;
          if (ix < 0 || ix >= wd) continue;
          const float* src = in + (iy * wd + ix) * ci;
          const float* wk = w + static_cast<std::size_t>((ky * k + kx) * ci) * co;
          for (int i = 0; i < ci; ++i) {
            const float v = src[i];
            const float* wr = wk + i * co;
            for (int c = 0; c < co; ++c) o[c] += v * wr[c];
          }
        }
      }
    }
  }
}

void conv_backward(const LayerSpec& l, const float* w, const float* in, const float* dout,
                   float* dw, float* din) {
  const int h = l.height;
  const int wd = l.width;
  const int ci = l.in_channels;
  const int co = l.out_channels;
  const int k = l.kernel;
  const int pad = k / 2;
  float* dbias = dw + static_cast<std::size_t>(k) * k * ci * co;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < wd; ++x) {
      const float* g = dout + (y * wd + x) * co;
      for (int c = 0; c < co; ++c) dbias[c] += g[c];
      for (int ky = 0; ky < k; ++ky) {
        const int iy = y + ky - pad;
        if (iy < 0 || iy >= h) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int ix = x + kx - pad;
          if (ix < 0 || ix >= wd) continue;
          const std::size_t q = static_cast<std::size_t>(iy * wd + ix) * ci;
          const std::size_t base = static_cast<std::size_t>((ky * k + kx) * ci) * co;
          for (int i = 0; i < ci; ++i) {
            const float v = in[q + i];
            float* dwr = dw + base + i * co;
            for (int c = 0; c < co; ++c) dwr[c] += v * g[c];
            if (din != nullptr) {
              const float* wr = w + base + i * co;
              float acc = 0.0F;
              for (int c = 0; c < co; ++c) acc += wr[c] * g[c];
              din[q + i] += acc;
            }
          }
        }
      }
    }
  }
}

void dense_forward(const LayerSpec& l, const float* w, const float* in, float* out) {
  const int n_in = l.in_features;
  const int n_out = l.out_features;
  const float* bias = w + static_cast<std::size_t>(n_in) * n_out;
  std::copy(bias, bias + n_out, out);
  for (int i = 0; i < n_in; ++i) {
    const float v = in[i];
    const float* wr = w + static_cast<std::size_t>(i) * n_out;
    for (int o = 0; o < n_out; ++o) out[o] += v * wr[o];
  }
}

void dense_backward(const LayerSpec& l, const float* w, const float* in, const float* dout,
                    float* dw, float* din) {
  const int n_in = l.in_features;
  const int n_out = l.out_features;
  float* dbias = dw + static_cast<std::size_t>(n_in) * n_out;
  for (int o = 0; o < n_out; ++o) dbias[o] += dout[o];
  for (int i = 0; i < n_in; ++i) {
    const float v = in[i];
    const float* wr = w + static_cast<std::size_t>(i) * n_out;
    float* dwr = dw + static_cast<std::size_t>(i) * n_out;
    float acc = 0.0F;
    for (int o = 0; o < n_out; ++o) {
      dwr[o] += v * dout[o];
      acc += wr[o] * dout[o];
    }
    if (din != nullptr) din[i] += acc;
  }
}

void layer_forward(const LayerSpec& l, const float* w, const float* in, float* out) {
  switch (l.kind) {
    case LayerKind::kConv2d: conv_forward(l, w, in, out); break;
    case LayerKind::kDense: dense_forward(l, w, in, out); break;
    case LayerKind::kLeakyRelu:
      for (int i = 0; i < l.in_features; ++i) out[i] = in[i] > 0.0F ? in[i] : kLeakySlope * in[i];
      break;
    case LayerKind::kTanh:
      // Clamped so the output stays strictly inside (-1, 1) in float.
      for (int i = 0; i < l.in_features; ++i) {
        out[i] = std::clamp(std::tanh(in[i]), -kTanhBound, kTanhBound);
      }
      break;
  }
}

// din is overwritten for activation layers and accumulated for weighted ones,
// so callers pass a zeroed buffer.
void layer_backward(const LayerSpec& l, const float* w, const float* in, const float* out,
                    const float* dout, float* dw, float* din) {
  switch (l.kind) {
    case LayerKind::kConv2d: conv_backward(l, w, in, dout, dw, din); break;
    case LayerKind::kDense: dense_backward(l, w, in, dout, dw, din); break;
    case LayerKind::kLeakyRelu:
      if (din == nullptr) break;
      for (int i = 0; i < l.in_features; ++i) din[i] = in[i] > 0.0F ? dout[i] : kLeakySlope * dout[i];
      break;
    case LayerKind::kTanh:
      if (din == nullptr) break;
      for (int i = 0; i < l.in_features; ++i) din[i] = dout[i] * (1.0F - out[i] * out[i]);
      break;
  }
}

int max_activation(const ParameterSet& p) {
  int m = p.input_size();
  for (const auto& l : p.layers) m = std::max(m, l.output_size());
  return m;
}

void check_batch(const ParameterSet& p, const Batch& b) {
  if (b.count() == 0) throw ConfigError("empty batch");
  if (b.input_size != p.input_size() || b.output_size != p.output_size()) {
    throw ConfigError("batch dims (" + std::to_string(b.input_size) + " -> " +
                      std::to_string(b.output_size) + ") do not match network (" +
                      std::to_string(p.input_size()) + " -> " + std::to_string(p.output_size()) + ")");
  }
}

// Runs the batch forward keeping every intermediate activation.
std::vector<std::vector<float>> forward_batch(const ParameterSet& p, const Batch& b) {
  const std::size_t n = b.count();
  std::vector<std::vector<float>> acts(p.layers.size() + 1);
  acts[0] = b.inputs;
  for (std::size_t li = 0; li < p.layers.size(); ++li) {
    const LayerSpec& l = p.layers[li];
    const float* w = p.weights.data() + p.offset_of(li);
    const int in_sz = l.input_size();
    const int out_sz = l.output_size();
    acts[li + 1].assign(n * out_sz, 0.0F);
    for (std::size_t s = 0; s < n; ++s) {
      layer_forward(l, w, acts[li].data() + s * in_sz, acts[li + 1].data() + s * out_sz);
    }
  }
  return acts;
}

double masked_loss(const std::vector<float>& y, const Batch& b, double* denom_out) {
  double sum = 0.0;
  double denom = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (b.mask[i] == 0.0F) continue;
    const double d = static_cast<double>(y[i]) - b.targets[i];
    sum += b.mask[i] * d * d;
    denom += b.mask[i];
  }
  if (denom_out != nullptr) *denom_out = denom;
  return denom > 0.0 ? sum / denom : 0.0;
}

}  // namespace

std::string_view layer_kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::kConv2d: return "conv2d";
    case LayerKind::kDense: return "dense";
    case LayerKind::kLeakyRelu: return "leaky_relu";
    case LayerKind::kTanh: return "tanh";
  }
  return "?";
}

LayerKind parse_layer_kind(std::string_view name) {
  if (name == "conv2d") return LayerKind::kConv2d;
  if (name == "dense") return LayerKind::kDense;
  if (name == "leaky_relu") return LayerKind::kLeakyRelu;
  if (name == "tanh") return LayerKind::kTanh;
  throw ConfigError("unknown layer kind '" + std::string(name) + "'");
}

LayerSpec LayerSpec::conv2d(int height, int width, int in_channels, int out_channels, int kernel) {
  LayerSpec l;
  l.kind = LayerKind::kConv2d;
  l.height = height;
  l.width = width;
  l.in_channels = in_channels;
  l.out_channels = out_channels;
  l.kernel = kernel;
  l.in_features = height * width * in_channels;
  l.out_features = height * width * out_channels;
  return l;
}

LayerSpec LayerSpec::dense(int in_features, int out_features) {
  LayerSpec l;
  l.kind = LayerKind::kDense;
  l.in_features = in_features;
  l.out_features = out_features;
  return l;
}

LayerSpec LayerSpec::leaky_relu(int size) {
  LayerSpec l;
  l.kind = LayerKind::kLeakyRelu;
  l.in_features = l.out_features = size;
  return l;
}

LayerSpec LayerSpec::tanh(int size) {
  LayerSpec l;
  l.kind = LayerKind::kTanh;
  l.in_features = l.out_features = size;
  return l;
}

int LayerSpec::input_size() const { return in_features; }
int LayerSpec::output_size() const { return out_features; }

std::size_t LayerSpec::param_count() const {
  switch (kind) {
    case LayerKind::kConv2d:
      return static_cast<std::size_t>(kernel) * kernel * in_channels * out_channels + out_channels;
    case LayerKind::kDense:
      return static_cast<std::size_t>(in_features) * out_features + out_features;
    default:
      return 0;
  }
}

std::size_t param_count(std::span<const LayerSpec> layers) {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.param_count();
  return n;
}

std::size_t ParameterSet::offset_of(std::size_t layer) const {
  std::size_t off = 0;
  for (std::size_t i = 0; i < layer; ++i) off += layers[i].param_count();
  return off;
}

void ParameterSet::validate() const {
  if (layers.empty()) throw ConfigError("network has no layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const LayerSpec& l = layers[i];
    if (l.in_features <= 0 || l.out_features <= 0) {
      throw ConfigError("layer " + std::to_string(i) + " has non-positive size");
    }
    if (l.kind == LayerKind::kConv2d &&
        (l.kernel <= 0 || l.kernel % 2 == 0 || l.in_features != l.height * l.width * l.in_channels ||
         l.out_features != l.height * l.width * l.out_channels)) {
      throw ConfigError("layer " + std::to_string(i) + " has inconsistent conv dims");
    }
    if ((l.kind == LayerKind::kLeakyRelu || l.kind == LayerKind::kTanh) &&
        l.in_features != l.out_features) {
      throw ConfigError("layer " + std::to_string(i) + " activation changes size");
    }
    if (i > 0 && layers[i - 1].output_size() != l.input_size()) {
      throw ConfigError("layer " + std::to_string(i) + " input " + std::to_string(l.input_size()) +
                        " does not match previous output " +
                        std::to_string(layers[i - 1].output_size()));
    }
  }
  if (weights.size() != param_count(layers)) {
    throw ConfigError("weight count " + std::to_string(weights.size()) + " != layer total " +
                      std::to_string(param_count(layers)));
  }
  if (!grads.empty() && grads.size() != weights.size()) {
    throw ConfigError("gradient buffer size mismatch");
  }
}

ParameterSet init_params(std::vector<LayerSpec> layers, std::uint64_t seed) {
  ParameterSet p;
  p.layers = std::move(layers);
  p.weights.assign(param_count(p.layers), 0.0F);
  p.grads.assign(p.weights.size(), 0.0F);
  p.validate();
  std::mt19937_64 rng(seed);
  std::size_t off = 0;
  for (const auto& l : p.layers) {
    const std::size_t n = l.param_count();
    if (n == 0) continue;
    const std::size_t fan_in = l.kind == LayerKind::kConv2d
                                   ? static_cast<std::size_t>(l.kernel) * l.kernel * l.in_channels
                                   : static_cast<std::size_t>(l.in_features);
    const std::size_t n_bias = l.kind == LayerKind::kConv2d ? l.out_channels : l.out_features;
    const float limit = std::sqrt(6.0F / static_cast<float>(fan_in));
    std::uniform_real_distribution<float> dist(-limit, limit);
    for (std::size_t i = 0; i < n - n_bias; ++i) p.weights[off + i] = dist(rng);
    off += n;
  }
  return p;
}

NetSize parse_net_size(std::string_view name) {
  if (name == "small") return NetSize::kSmall;
  if (name == "large") return NetSize::kLarge;
  throw ConfigError("unknown network size '" + std::string(name) + "'");
}

std::string_view net_size_name(NetSize s) { return s == NetSize::kSmall ? "small" : "large"; }

namespace {

std::vector<LayerSpec> trunk(Variant v, NetSize size, int head_outputs) {
  const GameShape g = shape_of(v);
  const int cells = g.rows * g.cols;
  std::vector<LayerSpec> layers;
  int ch = 2;
  auto conv = [&](int out) {
    layers.push_back(LayerSpec::conv2d(g.rows, g.cols, ch, out, 3));
    layers.push_back(LayerSpec::leaky_relu(cells * out));
    ch = out;
  };
  int hidden = 0;
  if (size == NetSize::kSmall) {
    conv(16);
    conv(16);
    hidden = 10;
  } else {
    conv(32);
    conv(64);
    conv(64);
    hidden = 16;
  }
  layers.push_back(LayerSpec::dense(cells * ch, hidden));
  layers.push_back(LayerSpec::leaky_relu(hidden));
  layers.push_back(LayerSpec::dense(hidden, head_outputs));
  return layers;
}

}  // namespace

std::vector<LayerSpec> value_net_layers(Variant v, NetSize size) {
  auto layers = trunk(v, size, 1);
  layers.push_back(LayerSpec::tanh(1));
  return layers;
}

std::vector<LayerSpec> q_net_layers(Variant v, NetSize size) {
  return trunk(v, size, shape_of(v).cols);
}

void forward(const ParameterSet& p, std::span<const float> input, std::span<float> output) {
  if (static_cast<int>(input.size()) != p.input_size()) {
    throw ConfigError("input size " + std::to_string(input.size()) + " != network input " +
                      std::to_string(p.input_size()));
  }
  if (static_cast<int>(output.size()) < p.output_size()) {
    throw ConfigError("output buffer too small");
  }
  thread_local std::vector<float> buf_a;
  thread_local std::vector<float> buf_b;
  const std::size_t need = static_cast<std::size_t>(max_activation(p));
  if (buf_a.size() < need) {
    buf_a.resize(need);
    buf_b.resize(need);
  }
  const float* in = input.data();
  float* out = buf_a.data();
  std::size_t off = 0;
  for (std::size_t li = 0; li < p.layers.size(); ++li) {
    const LayerSpec& l = p.layers[li];
    float* dst = li + 1 == p.layers.size() ? output.data() : out;
    layer_forward(l, p.weights.data() + off, in, dst);
    off += l.param_count();
    in = dst;
    out = (out == buf_a.data()) ? buf_b.data() : buf_a.data();
  }
}

void Batch::add(std::span<const float> input, std::span<const float> target,
                std::span<const float> m) {
  if (static_cast<int>(input.size()) != input_size || static_cast<int>(target.size()) != output_size ||
      static_cast<int>(m.size()) != output_size) {
    throw ConfigError("batch sample has wrong dims");
  }
  inputs.insert(inputs.end(), input.begin(), input.end());
  targets.insert(targets.end(), target.begin(), target.end());
  mask.insert(mask.end(), m.begin(), m.end());
}

void Batch::clear() {
  inputs.clear();
  targets.clear();
  mask.clear();
}

float batch_loss(const ParameterSet& p, const Batch& batch) {
  check_batch(p, batch);
  const auto acts = forward_batch(p, batch);
  return static_cast<float>(masked_loss(acts.back(), batch, nullptr));
}

float compute_gradients(ParameterSet& p, const Batch& batch) {
  check_batch(p, batch);
  const std::size_t n = batch.count();
  const auto acts = forward_batch(p, batch);
  double denom = 0.0;
  const double loss = masked_loss(acts.back(), batch, &denom);

  p.grads.assign(p.weights.size(), 0.0F);
  if (denom == 0.0) return 0.0F;

  const int out_sz = p.output_size();
  std::vector<float> dy(acts.back().size(), 0.0F);
  const float scale = static_cast<float>(2.0 / denom);
  for (std::size_t i = 0; i < dy.size(); ++i) {
    dy[i] = batch.mask[i] * scale * (acts.back()[i] - batch.targets[i]);
  }

  std::vector<std::size_t> offsets(p.layers.size());
  for (std::size_t li = 0; li < p.layers.size(); ++li) offsets[li] = p.offset_of(li);

  const int widest = max_activation(p);
  std::vector<float> g_out(widest);
  std::vector<float> g_in(widest);
  for (std::size_t s = 0; s < n; ++s) {
    std::copy_n(dy.data() + s * out_sz, out_sz, g_out.begin());
    for (std::size_t li = p.layers.size(); li-- > 0;) {
      const LayerSpec& l = p.layers[li];
      const int in_sz = l.input_size();
      const int o_sz = l.output_size();
      float* din = li == 0 ? nullptr : g_in.data();
      if (din != nullptr) std::fill_n(din, in_sz, 0.0F);
      layer_backward(l, p.weights.data() + offsets[li], acts[li].data() + s * in_sz,
                     acts[li + 1].data() + s * o_sz, g_out.data(), p.grads.data() + offsets[li], din);
      if (din != nullptr) std::swap(g_out, g_in);
    }
  }
  return static_cast<float>(loss);
}

OptimizerKind parse_optimizer(std::string_view name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  throw ConfigError("unknown optimizer '" + std::string(name) + "'");
}

std::string_view optimizer_name(OptimizerKind k) { return k == OptimizerKind::kSgd ? "sgd" : "adam"; }

Optimizer::Optimizer(OptimizerKind kind, float lr, std::size_t params) : kind_(kind), lr_(lr) {
  if (kind_ == OptimizerKind::kAdam) {
    m_.assign(params, 0.0F);
    v_.assign(params, 0.0F);
  }
}

void Optimizer::step(ParameterSet& p) {
  ++steps_;
  if (kind_ == OptimizerKind::kSgd) {
    for (std::size_t i = 0; i < p.weights.size(); ++i) p.weights[i] -= lr_ * p.grads[i];
    return;
  }
  if (m_.size() != p.weights.size()) throw ConfigError("optimizer state does not match network");
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr float kEps = 1e-8F;
  const double t = static_cast<double>(steps_);
  const float c1 = static_cast<float>(1.0 - std::pow(kBeta1, t));
  const float c2 = static_cast<float>(1.0 - std::pow(kBeta2, t));
  for (std::size_t i = 0; i < p.weights.size(); ++i) {
    const float g = p.grads[i];
    m_[i] = static_cast<float>(kBeta1) * m_[i] + static_cast<float>(1.0 - kBeta1) * g;
    v_[i] = static_cast<float>(kBeta2) * v_[i] + static_cast<float>(1.0 - kBeta2) * g * g;
    const float mh = m_[i] / c1;
    const float vh = v_[i] / c2;
    p.weights[i] -= lr_ * mh / (std::sqrt(vh) + kEps);
  }
}

float train_batch(ParameterSet& p, const Batch& batch, Optimizer& opt) {
  const float loss = compute_gradients(p, batch);
  if (!std::isfinite(loss)) {
    std::ostringstream msg;
    msg << "non-finite loss " << loss << " on batch of " << batch.count() << " samples after "
        << opt.steps() << " optimizer steps";
    throw DivergenceError(msg.str());
  }
  for (std::size_t i = 0; i < p.grads.size(); ++i) {
    if (!std::isfinite(p.grads[i])) {
      throw DivergenceError("non-finite gradient at weight " + std::to_string(i) + " after " +
                            std::to_string(opt.steps()) + " optimizer steps");
    }
  }
  opt.step(p);
  return loss;
}

float train_batch(ParameterSet& p, const Batch& batch, float lr) {
  Optimizer sgd(OptimizerKind::kSgd, lr, p.size());
  return train_batch(p, batch, sgd);
}

ValueNet::ValueNet(ParameterSet params) : params_(std::move(params)) {
  params_.validate();
  if (params_.output_size() != 1) throw ConfigError("value net must have one output");
}

ValueNet::ValueNet(Variant v, NetSize size, std::uint64_t seed)
    : ValueNet(init_params(value_net_layers(v, size), seed)) {}

float ValueNet::evaluate(const GameState& s) const {
  std::array<float, 2 * kMaxCells> x{};
  const std::size_t n = 2 * static_cast<std::size_t>(s.rows()) * s.cols();
  encode_channels_last(s, std::span<float>(x.data(), n));
  float y = 0.0F;
  forward(params_, std::span<const float>(x.data(), n), std::span<float>(&y, 1));
  return y;
}

QNet::QNet(ParameterSet params) : params_(std::move(params)) { params_.validate(); }

QNet::QNet(Variant v, NetSize size, std::uint64_t seed)
    : QNet(init_params(q_net_layers(v, size), seed)) {}

void QNet::evaluate(const GameState& s, std::span<float> out) const {
  std::array<float, 2 * kMaxCells> x{};
  const std::size_t n = 2 * static_cast<std::size_t>(s.rows()) * s.cols();
  encode_channels_last(s, std::span<float>(x.data(), n));
  forward(params_, std::span<const float>(x.data(), n), out);
}

std::vector<float> QNet::evaluate(const GameState& s) const {
  std::vector<float> out(actions());
  evaluate(s, out);
  return out;
}

std::vector<float> to_network_input(const Encoding& x) {
  std::vector<float> out(x.planes.size());
  for (int r = 0; r < x.rows; ++r) {
    for (int c = 0; c < x.cols; ++c) {
      const int p = r * x.cols + c;
      out[2 * p] = x.at(0, r, c);
      out[2 * p + 1] = x.at(1, r, c);
    }
  }
  return out;
}

float forward_value(const ValueNet& net, const Encoding& x) {
  const auto in = to_network_input(x);
  float y = 0.0F;
  forward(net.params(), in, std::span<float>(&y, 1));
  return y;
}

std::vector<float> forward_q(const QNet& net, const Encoding& x) {
  const auto in = to_network_input(x);
  std::vector<float> y(net.actions());
  forward(net.params(), in, y);
  return y;
}

}  // namespace probs::nn
