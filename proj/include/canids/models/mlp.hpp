#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "canids/error.hpp"
#include "canids/frame_codec.hpp"
#include "canids/models/boosting.hpp"
#include "canids/models/tree.hpp"
#include "canids/rng.hpp"

namespace canids {

/// 8 -> 16 -> 16 -> 16 -> 16 -> 1, ReLU hidden units, sigmoid output.
inline constexpr std::array<std::size_t, 6> kMlpWidths = {kNumFeatures, 16, 16, 16, 16, 1};
inline constexpr std::size_t kMlpLayers = kMlpWidths.size() - 1;
inline constexpr std::size_t kMlpMaxWidth = 16;

/// Raw bytes are divided by 255 on entry; the external contract stays in byte units.
inline constexpr double kInputScale = 1.0 / 255.0;

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;  // row-major [out][in]
  std::vector<double> bias;

  DenseLayer() = default;
  DenseLayer(std::size_t in_size, std::size_t out_size)
      : in(in_size), out(out_size), weights(in_size * out_size, 0.0), bias(out_size, 0.0) {}

  double& w(std::size_t o, std::size_t i) noexcept { return weights[o * in + i]; }
  double w(std::size_t o, std::size_t i) const noexcept { return weights[o * in + i]; }

  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

using Activations = std::array<double, kMlpMaxWidth>;

/// Everything the backward pass needs from one forward evaluation.
struct MlpTrace {
  Activations input{};                               // scaled input
  std::array<Activations, kMlpLayers> pre{};         // pre-activations per layer
  std::array<Activations, kMlpLayers - 1> hidden{};  // ReLU outputs
  double logit = 0.0;
  double output = 0.5;
};

struct Mlp {
  std::array<DenseLayer, kMlpLayers> layers;

  Mlp() {
    for (std::size_t l = 0; l < kMlpLayers; ++l) layers[l] = DenseLayer(kMlpWidths[l], kMlpWidths[l + 1]);
  }

  /// He-normal hidden weights, Glorot-normal output weights, zero biases.
  static Mlp random(Rng& rng) {
    Mlp m;
    for (std::size_t l = 0; l < kMlpLayers; ++l) {
      const double fan_in = static_cast<double>(kMlpWidths[l]);
      const double stddev = l + 1 < kMlpLayers ? std::sqrt(2.0 / fan_in) : std::sqrt(1.0 / fan_in);
      for (auto& w : m.layers[l].weights) w = stddev * rng.normal();
    }
    return m;
  }

  MlpTrace trace(const Point& x) const noexcept {
    MlpTrace t;
    for (std::size_t i = 0; i < kNumFeatures; ++i) t.input[i] = x[i] * kInputScale;
    const Activations* prev = &t.input;
    for (std::size_t l = 0; l < kMlpLayers; ++l) {
      const auto& layer = layers[l];
      for (std::size_t o = 0; o < layer.out; ++o) {
        double z = layer.bias[o];
        for (std::size_t i = 0; i < layer.in; ++i) z += layer.w(o, i) * (*prev)[i];
        t.pre[l][o] = z;
      }
      if (l + 1 < kMlpLayers) {
        for (std::size_t o = 0; o < layer.out; ++o) t.hidden[l][o] = t.pre[l][o] > 0.0 ? t.pre[l][o] : 0.0;
        prev = &t.hidden[l];
      }
    }
    t.logit = t.pre[kMlpLayers - 1][0];
    t.output = sigmoid(t.logit);
    return t;
  }

  double logit(const Point& x) const noexcept { return trace(x).logit; }
  double score(const Point& x) const noexcept { return trace(x).output; }

  /// Reverse pass from d(loss)/d(logit). Returns the derivative with respect
  /// to the raw byte inputs (the 1/255 scaling included) and, when `grads`
  /// is non-null, accumulates parameter derivatives into it. The ReLU
  /// derivative at exactly zero is taken as 0.
  Point backward(const MlpTrace& t, double dlogit, std::array<DenseLayer, kMlpLayers>* grads = nullptr) const {
    Activations delta{};
    delta[0] = dlogit;
    for (std::size_t l = kMlpLayers; l-- > 0;) {
      const auto& layer = layers[l];
      const Activations& below = l == 0 ? t.input : t.hidden[l - 1];
      if (grads) {
        auto& g = (*grads)[l];
        for (std::size_t o = 0; o < layer.out; ++o) {
          g.bias[o] += delta[o];
          for (std::size_t i = 0; i < layer.in; ++i) g.w(o, i) += delta[o] * below[i];
        }
      }
      Activations next{};
      for (std::size_t i = 0; i < layer.in; ++i) {
        double s = 0.0;
        for (std::size_t o = 0; o < layer.out; ++o) s += layer.w(o, i) * delta[o];
        next[i] = s;
      }
      if (l > 0) {
        for (std::size_t i = 0; i < layer.in; ++i) next[i] = t.pre[l - 1][i] > 0.0 ? next[i] : 0.0;
      }
      delta = next;
    }
    Point g{};
    for (std::size_t i = 0; i < kNumFeatures; ++i) g[i] = delta[i] * kInputScale;
    return g;
  }

  friend bool operator==(const Mlp&, const Mlp&) = default;
};

/// Binary cross-entropy of sigmoid(logit) against y, computed from the logit.
inline double bce_from_logit(double logit, int y) noexcept {
  return std::max(logit, 0.0) - logit * y + std::log1p(std::exp(-std::abs(logit)));
}

struct MlpOptions {
  std::size_t epochs = 10;
  std::size_t batch_size = 256;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;

  friend bool operator==(const MlpOptions&, const MlpOptions&) = default;
};

/// Mini-batch Adam on mean binary cross-entropy.
///
///   m <- b1 m + (1 - b1) g          v <- b2 v + (1 - b2) g^2
///   theta <- theta - lr * (m / (1 - b1^t)) / (sqrt(v / (1 - b2^t)) + eps)
///
/// Initial weights use stream derive_seed(seed, 0); epoch shuffles use
/// derive_seed(seed, 1). Per-sample gradients are summed in batch order.
inline Mlp train_mlp(const TrainingData& data, const MlpOptions& opts, std::uint64_t seed) {
  if (data.size() == 0) throw Error(ErrorCode::ClassAbsent, "empty training set");
  if (opts.batch_size == 0) throw Error(ErrorCode::InvalidArgument, "batch size must be > 0");
  Rng init_rng(derive_seed(seed, 0));
  Rng shuffle_rng(derive_seed(seed, 1));
  Mlp net = Mlp::random(init_rng);

  std::vector<Point> points(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) points[i] = to_point(data.x[i]);

  Mlp zero;
  std::array<DenseLayer, kMlpLayers> m = zero.layers, v = zero.layers, grads = zero.layers;
  std::vector<std::uint32_t> order(data.size());
  std::iota(order.begin(), order.end(), 0u);
  std::uint64_t step = 0;

  for (std::size_t epoch = 0; epoch < opts.epochs; ++epoch) {
    shuffle_rng.shuffle(std::span<std::uint32_t>(order));
    for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
      const std::size_t stop = std::min(order.size(), start + opts.batch_size);
      for (auto& g : grads) {
        std::fill(g.weights.begin(), g.weights.end(), 0.0);
        std::fill(g.bias.begin(), g.bias.end(), 0.0);
      }
      double loss = 0.0;
      for (std::size_t k = start; k < stop; ++k) {
        const auto s = order[k];
        const MlpTrace t = net.trace(points[s]);
        loss += bce_from_logit(t.logit, data.y[s]);
        net.backward(t, t.output - data.y[s], &grads);
      }
      if (!std::isfinite(loss))
        throw Error(ErrorCode::NonFiniteLoss, "MLP loss diverged in epoch " + std::to_string(epoch));

      ++step;
      const double inv_batch = 1.0 / static_cast<double>(stop - start);
      const double c1 = 1.0 - std::pow(opts.beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(opts.beta2, static_cast<double>(step));
      auto update = [&](std::vector<double>& theta, std::vector<double>& mv, std::vector<double>& vv,
                        const std::vector<double>& g) {
        for (std::size_t i = 0; i < theta.size(); ++i) {
          const double gi = g[i] * inv_batch;
          mv[i] = opts.beta1 * mv[i] + (1.0 - opts.beta1) * gi;
          vv[i] = opts.beta2 * vv[i] + (1.0 - opts.beta2) * gi * gi;
          theta[i] -= opts.learning_rate * (mv[i] / c1) / (std::sqrt(vv[i] / c2) + opts.adam_epsilon);
        }
      };
      for (std::size_t l = 0; l < kMlpLayers; ++l) {
        update(net.layers[l].weights, m[l].weights, v[l].weights, grads[l].weights);
        update(net.layers[l].bias, m[l].bias, v[l].bias, grads[l].bias);
      }
    }
  }
  for (const auto& layer : net.layers)
    for (double w : layer.weights)
      if (!std::isfinite(w)) throw Error(ErrorCode::NonFiniteLoss, "MLP weights are not finite");
  return net;
}

}  // namespace canids
