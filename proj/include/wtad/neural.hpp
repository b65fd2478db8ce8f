#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "wtad/error.hpp"
#include "wtad/random.hpp"

namespace wtad {

/// Dense row-major matrix of doubles.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> values) : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != r * c) throw Error(ErrorKind::ShapeMismatch, "matrix data does not match shape");
  }

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols, cols}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols, cols}; }

  /// Reshapes without preserving contents; keeps the allocation when possible.
  void resize(std::size_t r, std::size_t c) {
    rows = r;
    cols = c;
    data.resize(r * c);
  }

  bool operator==(const Matrix&) const = default;
};

/// Fully connected layer, `weights` is [n_out x n_in]. Hidden layers carry a
/// single learnable PReLU slope; the output layer is linear.
struct DenseLayer {
  Matrix weights;
  std::vector<double> biases;
  std::optional<double> prelu_slope;
  bool frozen = false;

  std::size_t n_in() const noexcept { return weights.cols; }
  std::size_t n_out() const noexcept { return weights.rows; }

  bool same_parameters(const DenseLayer& other) const {
    return weights == other.weights && biases == other.biases && prelu_slope == other.prelu_slope;
  }
};

/// Layers [0, encoder_len) form the encoder; the rest is the decoder.
struct Network {
  std::vector<DenseLayer> layers;
  std::size_t encoder_len = 0;

  std::size_t input_dim() const { return layers.empty() ? 0 : layers.front().n_in(); }
  std::size_t output_dim() const { return layers.empty() ? 0 : layers.back().n_out(); }

  /// Widths of every layer output except the last.
  std::vector<std::size_t> hidden_sizes() const {
    std::vector<std::size_t> sizes;
    for (std::size_t k = 0; k + 1 < layers.size(); ++k) sizes.push_back(layers[k].n_out());
    return sizes;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weights.data.size() + l.biases.size() + (l.prelu_slope ? 1 : 0);
    return n;
  }

  bool same_parameters(const Network& other) const {
    if (layers.size() != other.layers.size() || encoder_len != other.encoder_len) return false;
    for (std::size_t k = 0; k < layers.size(); ++k)
      if (!layers[k].same_parameters(other.layers[k])) return false;
    return true;
  }
};

inline void validate(const Network& net) {
  if (net.layers.empty()) throw Error(ErrorKind::BadArchitecture, "network has no layers");
  if (net.encoder_len > net.layers.size()) throw Error(ErrorKind::BadArchitecture, "encoder longer than network");
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const auto& l = net.layers[k];
    if (l.n_in() == 0 || l.n_out() == 0) throw Error(ErrorKind::BadArchitecture, "empty layer");
    if (l.biases.size() != l.n_out()) throw Error(ErrorKind::BadArchitecture, "bias size mismatch");
    if (k > 0 && l.n_in() != net.layers[k - 1].n_out())
      throw Error(ErrorKind::BadArchitecture, "layer dimensions do not chain");
    const bool last = k + 1 == net.layers.size();
    if (last == l.prelu_slope.has_value())
      throw Error(ErrorKind::BadArchitecture, "PReLU slope must be present on exactly the hidden layers");
  }
}

/// Builds input -> hidden... -> input with He-initialized weights. The hidden
/// sizes must be a palindrome whose unique minimum (the bottleneck) sits in
/// the middle; the encoder ends at the layer producing the bottleneck.
inline Network build_network(std::size_t input_dim, const std::vector<std::size_t>& hidden_sizes, std::uint64_t seed,
                             double initial_slope = 0.25) {
  if (input_dim == 0) throw Error(ErrorKind::BadArchitecture, "input dimension must be positive");
  if (hidden_sizes.empty()) throw Error(ErrorKind::BadArchitecture, "need at least one hidden layer");
  if (!std::equal(hidden_sizes.begin(), hidden_sizes.end(), hidden_sizes.rbegin()))
    throw Error(ErrorKind::BadArchitecture, "hidden sizes must be palindromic");
  const auto min_it = std::min_element(hidden_sizes.begin(), hidden_sizes.end());
  if (*min_it == 0 || std::count(hidden_sizes.begin(), hidden_sizes.end(), *min_it) != 1)
    throw Error(ErrorKind::BadArchitecture, "hidden sizes need a unique positive minimum");
  const auto bottleneck = static_cast<std::size_t>(min_it - hidden_sizes.begin());

  Rng rng(seed);
  Network net;
  std::vector<std::size_t> widths{input_dim};
  widths.insert(widths.end(), hidden_sizes.begin(), hidden_sizes.end());
  widths.push_back(input_dim);
  for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
    DenseLayer layer;
    layer.weights = Matrix(widths[k + 1], widths[k]);
    const double stddev = std::sqrt(2.0 / static_cast<double>(widths[k]));
    for (auto& w : layer.weights.data) w = rng.normal(0.0, stddev);
    layer.biases.assign(widths[k + 1], 0.0);
    if (k + 2 < widths.size()) layer.prelu_slope = initial_slope;
    net.layers.push_back(std::move(layer));
  }
  net.encoder_len = bottleneck + 1;
  return net;
}

enum class FreezeGroup { None, Encoder, Decoder };

inline void freeze(Network& net, FreezeGroup group) {
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const bool in_encoder = k < net.encoder_len;
    net.layers[k].frozen = (group == FreezeGroup::Encoder && in_encoder) || (group == FreezeGroup::Decoder && !in_encoder);
  }
}

inline Network set_frozen(Network net, FreezeGroup group) {
  freeze(net, group);
  return net;
}

/// Per-layer gradient (or optimizer moment) buffers mirroring a network.
struct LayerGradients {
  Matrix weights;
  std::vector<double> biases;
  double prelu_slope = 0.0;

  bool operator==(const LayerGradients&) const = default;
};

struct Gradients {
  std::vector<LayerGradients> layers;

  static Gradients zeros_like(const Network& net) {
    Gradients g;
    for (const auto& l : net.layers)
      g.layers.push_back(LayerGradients{Matrix(l.n_out(), l.n_in()), std::vector<double>(l.n_out(), 0.0), 0.0});
    return g;
  }

  bool operator==(const Gradients&) const = default;
};

/// Activations kept from a forward pass: `pre[k]` = W a + b, `post[k]` = layer output.
struct ForwardTrace {
  std::vector<Matrix> pre;
  std::vector<Matrix> post;
};

namespace detail {

inline void check_batch(const Network& net, const Matrix& batch) {
  if (net.layers.empty()) throw Error(ErrorKind::BadArchitecture, "network has no layers");
  if (batch.cols != net.input_dim())
    throw Error(ErrorKind::ShapeMismatch, "batch width " + std::to_string(batch.cols) + " != input dimension " +
                                              std::to_string(net.input_dim()));
}

inline double prelu(double z, double slope) { return z > 0.0 ? z : slope * z; }

inline void dense_forward(const DenseLayer& layer, const Matrix& in, Matrix& pre, Matrix& post) {
  const std::size_t n_in = layer.n_in(), n_out = layer.n_out();
  pre.resize(in.rows, n_out);
  post.resize(in.rows, n_out);
  for (std::size_t b = 0; b < in.rows; ++b) {
    const double* x = in.data.data() + b * n_in;
    double* z = pre.data.data() + b * n_out;
    for (std::size_t o = 0; o < n_out; ++o) {
      const double* w = layer.weights.data.data() + o * n_in;
      // Four partial sums keep the dependency chain short.
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
      std::size_t i = 0;
      for (; i + 4 <= n_in; i += 4) {
        s0 += w[i] * x[i];
        s1 += w[i + 1] * x[i + 1];
        s2 += w[i + 2] * x[i + 2];
        s3 += w[i + 3] * x[i + 3];
      }
      for (; i < n_in; ++i) s0 += w[i] * x[i];
      z[o] = layer.biases[o] + ((s0 + s1) + (s2 + s3));
    }
    double* a = post.data.data() + b * n_out;
    if (layer.prelu_slope) {
      const double slope = *layer.prelu_slope;
      for (std::size_t o = 0; o < n_out; ++o) a[o] = prelu(z[o], slope);
    } else {
      std::copy(z, z + n_out, a);
    }
  }
}

}  // namespace detail

inline void forward_trace(const Network& net, const Matrix& batch, ForwardTrace& trace) {
  detail::check_batch(net, batch);
  trace.pre.resize(net.layers.size());
  trace.post.resize(net.layers.size());
  const Matrix* in = &batch;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    detail::dense_forward(net.layers[k], *in, trace.pre[k], trace.post[k]);
    in = &trace.post[k];
  }
}

/// Reconstruction of `batch` (rows are samples).
inline Matrix forward(const Network& net, const Matrix& batch) {
  ForwardTrace trace;
  forward_trace(net, batch, trace);
  return std::move(trace.post.back());
}

/// Mean over all entries of the squared difference.
inline double mse_loss(const Matrix& pred, const Matrix& target) {
  if (pred.rows != target.rows || pred.cols != target.cols)
    throw Error(ErrorKind::ShapeMismatch, "prediction and target shapes differ");
  if (pred.data.empty()) return 0.0;
  double sum = 0.0;
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double d = pred.data[i] - target.data[i];
    sum += d * d;
  }
  return sum / static_cast<double>(pred.data.size());
}

/// Exact gradient of mse_loss(forward(net, batch), target) into `grads`
/// (which must mirror `net`); returns the loss. Frozen layers get zero
/// gradients. At z == 0 the PReLU derivative takes the positive branch.
inline double loss_and_gradients(const Network& net, const Matrix& batch, const Matrix& target, ForwardTrace& trace,
                                 Gradients& grads) {
  forward_trace(net, batch, trace);
  const Matrix& pred = trace.post.back();
  if (pred.rows != target.rows || pred.cols != target.cols)
    throw Error(ErrorKind::ShapeMismatch, "prediction and target shapes differ");
  if (grads.layers.size() != net.layers.size()) grads = Gradients::zeros_like(net);

  const std::size_t batch_rows = batch.rows;
  const double scale = 2.0 / static_cast<double>(pred.data.size());
  double loss = 0.0;
  Matrix delta(pred.rows, pred.cols);
  for (std::size_t i = 0; i < pred.data.size(); ++i) {
    const double d = pred.data[i] - target.data[i];
    loss += d * d;
    delta.data[i] = scale * d;
  }
  loss /= static_cast<double>(pred.data.size());

  // Layers below the lowest trainable one need no backpropagated signal.
  std::size_t lowest_trainable = net.layers.size();
  for (std::size_t k = 0; k < net.layers.size(); ++k)
    if (!net.layers[k].frozen) {
      lowest_trainable = k;
      break;
    }

  Matrix delta_prev;
  for (std::size_t k = net.layers.size(); k-- > 0;) {
    const DenseLayer& layer = net.layers[k];
    LayerGradients& g = grads.layers[k];
    const std::size_t n_in = layer.n_in(), n_out = layer.n_out();
    const Matrix& z = trace.pre[k];
    const Matrix& input = k == 0 ? batch : trace.post[k - 1];

    // delta holds dL/d(post); convert it to dL/d(pre) in place.
    double slope_grad = 0.0;
    if (layer.prelu_slope) {
      const double slope = *layer.prelu_slope;
      for (std::size_t i = 0; i < delta.data.size(); ++i) {
        if (z.data[i] < 0.0) {
          slope_grad += delta.data[i] * z.data[i];
          delta.data[i] *= slope;
        }
      }
    }

    std::fill(g.weights.data.begin(), g.weights.data.end(), 0.0);
    std::fill(g.biases.begin(), g.biases.end(), 0.0);
    g.prelu_slope = 0.0;
    if (!layer.frozen) {
      g.prelu_slope = slope_grad;
      for (std::size_t b = 0; b < batch_rows; ++b) {
        const double* dz = delta.data.data() + b * n_out;
        const double* x = input.data.data() + b * n_in;
        for (std::size_t o = 0; o < n_out; ++o) {
          const double d = dz[o];
          g.biases[o] += d;
          double* gw = g.weights.data.data() + o * n_in;
          for (std::size_t i = 0; i < n_in; ++i) gw[i] += d * x[i];
        }
      }
    }

    if (k == 0 || k <= lowest_trainable) {
      // Zero the remaining (frozen) layers' gradients and stop.
      for (std::size_t j = 0; j < k; ++j) {
        auto& gj = grads.layers[j];
        std::fill(gj.weights.data.begin(), gj.weights.data.end(), 0.0);
        std::fill(gj.biases.begin(), gj.biases.end(), 0.0);
        gj.prelu_slope = 0.0;
      }
      break;
    }
    delta_prev.resize(batch_rows, n_in);
    std::fill(delta_prev.data.begin(), delta_prev.data.end(), 0.0);
    for (std::size_t b = 0; b < batch_rows; ++b) {
      const double* dz = delta.data.data() + b * n_out;
      double* dp = delta_prev.data.data() + b * n_in;
      for (std::size_t o = 0; o < n_out; ++o) {
        const double d = dz[o];
        const double* w = layer.weights.data.data() + o * n_in;
        for (std::size_t i = 0; i < n_in; ++i) dp[i] += d * w[i];
      }
    }
    std::swap(delta, delta_prev);
  }
  return loss;
}

inline Gradients backward(const Network& net, const Matrix& batch, const Matrix& target) {
  ForwardTrace trace;
  Gradients grads = Gradients::zeros_like(net);
  loss_and_gradients(net, batch, target, trace, grads);
  return grads;
}

/// Optimizer state; the moment buffers mirror the network's parameters.
struct AdamState {
  Gradients first_moment;
  Gradients second_moment;
  std::uint64_t step_count = 0;
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState fresh(const Network& net, double learning_rate) {
    AdamState s;
    s.first_moment = Gradients::zeros_like(net);
    s.second_moment = Gradients::zeros_like(net);
    s.learning_rate = learning_rate;
    return s;
  }
};

namespace detail {

struct AdamCoefficients {
  double beta1, beta2, epsilon, lr, correction1, correction2;
};

inline void adam_update(double& param, double grad, double& m, double& v, const AdamCoefficients& c) {
  m = c.beta1 * m + (1.0 - c.beta1) * grad;
  v = c.beta2 * v + (1.0 - c.beta2) * grad * grad;
  const double m_hat = m / c.correction1;
  const double v_hat = v / c.correction2;
  param -= c.lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
}

inline bool same_shape(const LayerGradients& g, const DenseLayer& l) {
  return g.weights.rows == l.n_out() && g.weights.cols == l.n_in() && g.biases.size() == l.n_out();
}

}  // namespace detail

/// One bias-corrected Adam update of every non-frozen parameter. Frozen
/// layers keep both their parameters and their moments.
inline void adam_step(AdamState& state, Network& net, const Gradients& grads) {
  const auto n = net.layers.size();
  if (grads.layers.size() != n || state.first_moment.layers.size() != n || state.second_moment.layers.size() != n)
    throw Error(ErrorKind::ShapeMismatch, "optimizer state or gradients do not mirror the network");
  for (std::size_t k = 0; k < n; ++k) {
    const auto& l = net.layers[k];
    if (!detail::same_shape(grads.layers[k], l) || !detail::same_shape(state.first_moment.layers[k], l) ||
        !detail::same_shape(state.second_moment.layers[k], l))
      throw Error(ErrorKind::ShapeMismatch, "gradient shape mismatch at layer " + std::to_string(k));
  }

  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const detail::AdamCoefficients c{state.beta1,
                                   state.beta2,
                                   state.epsilon,
                                   state.learning_rate,
                                   1.0 - std::pow(state.beta1, t),
                                   1.0 - std::pow(state.beta2, t)};
  for (std::size_t k = 0; k < n; ++k) {
    auto& layer = net.layers[k];
    if (layer.frozen) continue;
    const auto& g = grads.layers[k];
    auto& m = state.first_moment.layers[k];
    auto& v = state.second_moment.layers[k];
    for (std::size_t i = 0; i < layer.weights.data.size(); ++i)
      detail::adam_update(layer.weights.data[i], g.weights.data[i], m.weights.data[i], v.weights.data[i], c);
    for (std::size_t i = 0; i < layer.biases.size(); ++i)
      detail::adam_update(layer.biases[i], g.biases[i], m.biases[i], v.biases[i], c);
    if (layer.prelu_slope) detail::adam_update(*layer.prelu_slope, g.prelu_slope, m.prelu_slope, v.prelu_slope, c);
  }
}

struct TrainOptions {
  std::size_t epochs = 50;
  std::size_t batch_size = 256;
  double learning_rate = 0.001;
  std::uint64_t seed = 0;
};

/// Mini-batch Adam on the reconstruction objective (targets = inputs), with
/// a fresh optimizer and a seeded shuffle per epoch. Returns the mean
/// training MSE of each epoch.
inline std::vector<double> train_autoencoder(Network& net, const Matrix& data, const TrainOptions& opts) {
  if (data.cols != net.input_dim()) throw Error(ErrorKind::ShapeMismatch, "training data width != input dimension");
  if (data.rows == 0) throw Error(ErrorKind::EmptyResult, "no training rows");
  if (opts.batch_size == 0) throw Error(ErrorKind::BadSpec, "batch size must be positive");
  validate(net);

  AdamState state = AdamState::fresh(net, opts.learning_rate);
  Gradients grads = Gradients::zeros_like(net);
  ForwardTrace trace;
  Rng rng(opts.seed);
  std::vector<std::size_t> order(data.rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Matrix batch;
  std::vector<double> history;
  history.reserve(opts.epochs);

  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    double weighted = 0.0;
    for (std::size_t start = 0; start < data.rows; start += opts.batch_size) {
      const std::size_t count = std::min(opts.batch_size, data.rows - start);
      batch.resize(count, data.cols);
      for (std::size_t b = 0; b < count; ++b) {
        const auto src = data.row(order[start + b]);
        std::copy(src.begin(), src.end(), batch.row(b).begin());
      }
      const double loss = loss_and_gradients(net, batch, batch, trace, grads);
      adam_step(state, net, grads);
      weighted += loss * static_cast<double>(count);
    }
    history.push_back(weighted / static_cast<double>(data.rows));
  }
  return history;
}

/// Full-data reconstruction MSE, evaluated in chunks.
inline double reconstruction_mse(const Network& net, const Matrix& data, std::size_t chunk = 4096) {
  if (data.rows == 0) return 0.0;
  ForwardTrace trace;
  Matrix part;
  double sum = 0.0;
  for (std::size_t start = 0; start < data.rows; start += chunk) {
    const std::size_t count = std::min(chunk, data.rows - start);
    part = Matrix(count, data.cols,
                  std::vector<double>(data.data.begin() + static_cast<std::ptrdiff_t>(start * data.cols),
                                      data.data.begin() + static_cast<std::ptrdiff_t>((start + count) * data.cols)));
    forward_trace(net, part, trace);
    sum += mse_loss(trace.post.back(), part) * static_cast<double>(count * data.cols);
  }
  return sum / static_cast<double>(data.rows * data.cols);
}

inline nlohmann::json to_json(const Network& net) {
  auto layers = nlohmann::json::array();
  for (const auto& l : net.layers) {
    nlohmann::json j{{"n_in", l.n_in()}, {"n_out", l.n_out()}, {"weights", l.weights.data}, {"biases", l.biases}};
    if (l.prelu_slope) j["prelu_slope"] = *l.prelu_slope;
    layers.push_back(std::move(j));
  }
  return {{"hidden_sizes", net.hidden_sizes()}, {"encoder_len", net.encoder_len}, {"layers", std::move(layers)}};
}

inline Network network_from_json(const nlohmann::json& j) {
  Network net;
  try {
    net.encoder_len = j.at("encoder_len").get<std::size_t>();
    for (const auto& lj : j.at("layers")) {
      DenseLayer l;
      l.biases = lj.at("biases").get<std::vector<double>>();
      auto w = lj.at("weights").get<std::vector<double>>();
      const std::size_t n_out = l.biases.size();
      const std::size_t n_in = lj.contains("n_in") ? lj.at("n_in").get<std::size_t>() : (n_out ? w.size() / n_out : 0);
      if (n_out == 0 || w.size() != n_in * n_out) throw Error(ErrorKind::BadArtifact, "layer weight shape mismatch");
      l.weights = Matrix(n_out, n_in, std::move(w));
      if (lj.contains("prelu_slope")) l.prelu_slope = lj.at("prelu_slope").get<double>();
      net.layers.push_back(std::move(l));
    }
    if (j.contains("hidden_sizes") && j.at("hidden_sizes").get<std::vector<std::size_t>>() != net.hidden_sizes())
      throw Error(ErrorKind::BadArtifact, "hidden_sizes disagree with layer shapes");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::BadArtifact, std::string("network: ") + e.what());
  }
  try {
    validate(net);
  } catch (const Error& e) {
    throw Error(ErrorKind::BadArtifact, e.what());
  }
  return net;
}

}  // namespace wtad
