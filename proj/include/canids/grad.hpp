#pragma once

#include <algorithm>
#include <cmath>

#include "canids/error.hpp"
#include "canids/frame_codec.hpp"
#include "canids/models/classifier.hpp"
#include "canids/models/mlp.hpp"

namespace canids {

/// d BCE(score(x), y) / dx in raw byte coordinates.
using InputGradient = Point;

inline double surrogate_loss(const Mlp& mlp, const Point& x, int y) noexcept {
  return bce_from_logit(mlp.logit(x), y);
}

/// Exact reverse-mode derivative of scale -> 4 ReLU layers -> sigmoid -> BCE.
/// dBCE/dlogit collapses to sigmoid(logit) - y.
inline InputGradient input_gradient(const Mlp& mlp, const Point& x, int y) {
  const MlpTrace t = mlp.trace(x);
  return mlp.backward(t, t.output - y);
}

inline InputGradient input_gradient(const ClassifierModel& model, const Point& x, int y) {
  return input_gradient(model.mlp(), x, y);
}

inline InputGradient input_gradient(const ClassifierModel& model, const FeatureVector& x, int y) {
  return input_gradient(model.mlp(), to_point(x), y);
}

/// max_i |g_i - fd_i| / (|g_i| + 1e-12) against central differences with step h.
inline double finite_diff_check(const Mlp& mlp, const Point& x, int y, double h) {
  if (!(h > 0.0)) throw Error(ErrorCode::InvalidArgument, "finite-difference step must be > 0");
  const InputGradient g = input_gradient(mlp, x, y);
  double worst = 0.0;
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    Point plus = x, minus = x;
    plus[i] += h;
    minus[i] -= h;
    const double fd = (surrogate_loss(mlp, plus, y) - surrogate_loss(mlp, minus, y)) / (2.0 * h);
    worst = std::max(worst, std::abs(g[i] - fd) / (std::abs(g[i]) + 1e-12));
  }
  return worst;
}

inline double finite_diff_check(const ClassifierModel& model, const Point& x, int y, double h) {
  return finite_diff_check(model.mlp(), x, y, h);
}

/// True when no hidden pre-activation changes sign anywhere on the probe
/// points x +- h e_i, i.e. central differences never straddle a ReLU kink.
inline bool kink_free(const Mlp& mlp, const Point& x, double h) noexcept {
  const MlpTrace base = mlp.trace(x);
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    for (double sign : {-1.0, 1.0}) {
      Point p = x;
      p[i] += sign * h;
      const MlpTrace t = mlp.trace(p);
      for (std::size_t l = 0; l + 1 < kMlpLayers; ++l)
        for (std::size_t o = 0; o < kMlpWidths[l + 1]; ++o)
          if ((t.pre[l][o] > 0.0) != (base.pre[l][o] > 0.0)) return false;
    }
  }
  return true;
}

}  // namespace canids
