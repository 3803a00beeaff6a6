#pragma once
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <vector>

#include "aflsim/rng.hpp"

namespace aflsim {

/// Fully connected network: rectifier on hidden layers, identity output.
/// Weights are row-major [out][in] per layer.
struct Mlp {
  std::vector<int> dims;
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  int input_dim() const { return dims.front(); }
  int output_dim() const { return dims.back(); }
  int layer_count() const { return static_cast<int>(weights.size()); }

  std::vector<double> forward(const std::vector<double>& input) const {
    if (static_cast<int>(input.size()) != input_dim())
      throw std::invalid_argument("input dimension mismatch");
    std::vector<double> act = input;
    std::vector<double> next;
    for (int l = 0; l < layer_count(); ++l) {
      const int in = dims[static_cast<std::size_t>(l)];
      const int out = dims[static_cast<std::size_t>(l) + 1];
      next.assign(static_cast<std::size_t>(out), 0.0);
      const double* w = weights[static_cast<std::size_t>(l)].data();
      for (int o = 0; o < out; ++o) {
        double z = biases[static_cast<std::size_t>(l)][static_cast<std::size_t>(o)];
        const double* row = w + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) z += row[i] * act[static_cast<std::size_t>(i)];
        next[static_cast<std::size_t>(o)] =
            (l + 1 < layer_count()) ? (z > 0.0 ? z : 0.0) : z;
      }
      act.swap(next);
    }
    return act;
  }
};

/// He-style fan-in uniform init; biases zero. Same seed, same parameters.
inline Mlp mlp_init(const std::vector<int>& layer_dims, std::uint64_t seed) {
  if (layer_dims.size() < 2)
    throw std::invalid_argument("need at least input and output dims");
  Mlp net;
  net.dims = layer_dims;
  RngEngine rng = derive_engine(seed, 0x6d6c70);
  for (std::size_t l = 0; l + 1 < layer_dims.size(); ++l) {
    const int in = layer_dims[l];
    const int out = layer_dims[l + 1];
    const double limit = std::sqrt(6.0 / in);
    std::vector<double> w(static_cast<std::size_t>(in) * out);
    for (double& x : w) x = uniform_real(rng, -limit, limit);
    net.weights.push_back(std::move(w));
    net.biases.emplace_back(static_cast<std::size_t>(out), 0.0);
  }
  return net;
}

/// Gradient (or accumulator) storage shaped like an Mlp's parameters.
struct MlpGrads {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  static MlpGrads zeros_like(const Mlp& net) {
    MlpGrads g;
    for (const auto& w : net.weights) g.weights.emplace_back(w.size(), 0.0);
    for (const auto& b : net.biases) g.biases.emplace_back(b.size(), 0.0);
    return g;
  }

  void reset() {
    for (auto& w : weights) std::fill(w.begin(), w.end(), 0.0);
    for (auto& b : biases) std::fill(b.begin(), b.end(), 0.0);
  }
};

/// Scratch activations for batch passes; reusable across calls.
struct MlpWorkspace {
  std::vector<std::vector<double>> activations;  // per layer, m x dim
  std::vector<std::vector<double>> deltas;       // two ping-pong buffers
};

/// Batch forward pass; activations land in ws (activations[0] is the input).
inline void forward_batch(const Mlp& net, const double* inputs, int m,
                          MlpWorkspace& ws) {
  const int layers = net.layer_count();
  ws.activations.resize(static_cast<std::size_t>(layers) + 1);
  ws.activations[0].assign(inputs,
                           inputs + static_cast<std::size_t>(m) * net.input_dim());
  for (int l = 0; l < layers; ++l) {
    const int in = net.dims[static_cast<std::size_t>(l)];
    const int out = net.dims[static_cast<std::size_t>(l) + 1];
    auto& src = ws.activations[static_cast<std::size_t>(l)];
    auto& dst = ws.activations[static_cast<std::size_t>(l) + 1];
    dst.assign(static_cast<std::size_t>(m) * out, 0.0);
    const double* w = net.weights[static_cast<std::size_t>(l)].data();
    const double* bias = net.biases[static_cast<std::size_t>(l)].data();
    const bool hidden = l + 1 < layers;
    for (int b = 0; b < m; ++b) {
      const double* x = src.data() + static_cast<std::size_t>(b) * in;
      double* y = dst.data() + static_cast<std::size_t>(b) * out;
      for (int o = 0; o < out; ++o) {
        double z = bias[o];
        const double* row = w + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) z += row[i] * x[i];
        y[o] = hidden ? (z > 0.0 ? z : 0.0) : z;
      }
    }
  }
}

/// TD regression loss over a batch:
///   loss = (1/2) * mean_b (targets[b] - Q(s_b, actions[b]))^2
/// Gradients flow only through each sample's chosen action unit. Returns the
/// loss; gradients are accumulated into a freshly reset `grads`.
inline double td_loss_and_grads(const Mlp& net, const double* states, int m,
                                const int* actions, const double* targets,
                                MlpGrads& grads, MlpWorkspace& ws) {
  if (m <= 0) throw std::invalid_argument("empty batch");
  forward_batch(net, states, m, ws);
  const int layers = net.layer_count();
  const int out_dim = net.output_dim();
  grads.reset();

  ws.deltas.resize(2);
  auto& delta = ws.deltas[0];
  auto& delta_prev = ws.deltas[1];
  delta.assign(static_cast<std::size_t>(m) * out_dim, 0.0);

  const auto& q = ws.activations[static_cast<std::size_t>(layers)];
  double loss = 0.0;
  for (int b = 0; b < m; ++b) {
    const int a = actions[b];
    if (a < 0 || a >= out_dim) throw std::invalid_argument("action index out of range");
    const double err = targets[b] - q[static_cast<std::size_t>(b) * out_dim + a];
    loss += err * err;
    delta[static_cast<std::size_t>(b) * out_dim + a] = -err / m;
  }
  loss *= 0.5 / m;

  for (int l = layers - 1; l >= 0; --l) {
    const int in = net.dims[static_cast<std::size_t>(l)];
    const int out = net.dims[static_cast<std::size_t>(l) + 1];
    const auto& below = ws.activations[static_cast<std::size_t>(l)];
    double* gw = grads.weights[static_cast<std::size_t>(l)].data();
    double* gb = grads.biases[static_cast<std::size_t>(l)].data();
    for (int b = 0; b < m; ++b) {
      const double* d = delta.data() + static_cast<std::size_t>(b) * out;
      const double* x = below.data() + static_cast<std::size_t>(b) * in;
      for (int o = 0; o < out; ++o) {
        const double dv = d[o];
        if (dv == 0.0) continue;
        gb[o] += dv;
        double* row = gw + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) row[i] += dv * x[i];
      }
    }
    if (l == 0) break;
    delta_prev.assign(static_cast<std::size_t>(m) * in, 0.0);
    const double* w = net.weights[static_cast<std::size_t>(l)].data();
    for (int b = 0; b < m; ++b) {
      const double* d = delta.data() + static_cast<std::size_t>(b) * out;
      const double* x = below.data() + static_cast<std::size_t>(b) * in;
      double* dp = delta_prev.data() + static_cast<std::size_t>(b) * in;
      for (int o = 0; o < out; ++o) {
        const double dv = d[o];
        if (dv == 0.0) continue;
        const double* row = w + static_cast<std::size_t>(o) * in;
        for (int i = 0; i < in; ++i) dp[i] += dv * row[i];
      }
      // rectifier gate: activation is zero exactly where the unit was off
      for (int i = 0; i < in; ++i)
        if (x[i] <= 0.0) dp[i] = 0.0;
    }
    delta.swap(delta_prev);
  }
  return loss;
}

/// RMSprop accumulator state paired with one Mlp.
struct RmsPropState {
  double learning_rate = 0.0005;
  double rho = 0.9;
  double eps = 1e-8;
  MlpGrads acc;

  static RmsPropState for_net(const Mlp& net, double lr) {
    RmsPropState s;
    s.learning_rate = lr;
    s.acc = MlpGrads::zeros_like(net);
    return s;
  }
};

/// One RMSprop update:
///   acc <- rho*acc + (1-rho)*g^2;  p <- p - lr * g / sqrt(acc + eps)
inline void rmsprop_step(RmsPropState& state, Mlp& net, const MlpGrads& grads) {
  auto apply = [&](std::vector<double>& p, std::vector<double>& acc,
                   const std::vector<double>& g) {
    if (p.size() != g.size()) throw std::invalid_argument("gradient shape mismatch");
    for (std::size_t i = 0; i < p.size(); ++i) {
      acc[i] = state.rho * acc[i] + (1.0 - state.rho) * g[i] * g[i];
      p[i] -= state.learning_rate * g[i] / std::sqrt(acc[i] + state.eps);
    }
  };
  for (int l = 0; l < net.layer_count(); ++l) {
    apply(net.weights[static_cast<std::size_t>(l)],
          state.acc.weights[static_cast<std::size_t>(l)],
          grads.weights[static_cast<std::size_t>(l)]);
    apply(net.biases[static_cast<std::size_t>(l)],
          state.acc.biases[static_cast<std::size_t>(l)],
          grads.biases[static_cast<std::size_t>(l)]);
  }
}

// ---------------------------------------------------------------------------
// Parameter serialization. Byte layout (little-endian):
//   u32 D                 number of entries in dims
//   u32 x D               the dims
//   f64 x P               parameters, per layer: weights row-major, then biases
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void append_le(std::vector<std::uint8_t>& out, T value) {
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.push_back(static_cast<std::uint8_t>(
        (static_cast<std::uint64_t>(value) >> (8 * i)) & 0xff));
}

inline void append_f64(std::vector<std::uint8_t>& out, double value) {
  std::uint64_t bits;
  std::memcpy(&bits, &value, sizeof(bits));
  append_le(out, bits);
}

struct ByteReader {
  const std::uint8_t* data;
  std::size_t size;
  std::size_t pos = 0;

  template <typename T>
  T read_le() {
    if (pos + sizeof(T) > size) throw std::runtime_error("truncated parameter blob");
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i)
      v |= static_cast<std::uint64_t>(data[pos + i]) << (8 * i);
    pos += sizeof(T);
    return static_cast<T>(v);
  }

  double read_f64() {
    std::uint64_t bits = read_le<std::uint64_t>();
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }
};

}  // namespace detail

inline std::vector<std::uint8_t> save_params(const Mlp& net) {
  std::vector<std::uint8_t> out;
  detail::append_le(out, static_cast<std::uint32_t>(net.dims.size()));
  for (int d : net.dims) detail::append_le(out, static_cast<std::uint32_t>(d));
  for (int l = 0; l < net.layer_count(); ++l) {
    for (double v : net.weights[static_cast<std::size_t>(l)]) detail::append_f64(out, v);
    for (double v : net.biases[static_cast<std::size_t>(l)]) detail::append_f64(out, v);
  }
  return out;
}

inline Mlp load_params(const std::uint8_t* data, std::size_t size) {
  detail::ByteReader r{data, size};
  const auto ndims = r.read_le<std::uint32_t>();
  if (ndims < 2 || ndims > 64) throw std::runtime_error("bad parameter header");
  std::vector<int> dims(ndims);
  for (auto& d : dims) d = static_cast<int>(r.read_le<std::uint32_t>());
  Mlp net;
  net.dims = dims;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const std::size_t in = static_cast<std::size_t>(dims[l]);
    const std::size_t out = static_cast<std::size_t>(dims[l + 1]);
    std::vector<double> w(in * out);
    for (double& v : w) v = r.read_f64();
    std::vector<double> b(out);
    for (double& v : b) v = r.read_f64();
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  if (r.pos != size) throw std::runtime_error("trailing bytes in parameter blob");
  return net;
}

inline Mlp load_params(const std::vector<std::uint8_t>& bytes) {
  return load_params(bytes.data(), bytes.size());
}

}  // namespace aflsim
