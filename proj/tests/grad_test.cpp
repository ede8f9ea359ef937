#include <gtest/gtest.h>

#include <cmath>

#include "canids/grad.hpp"

using namespace canids;

namespace {

// One active chain: input j -> unit 0 of every hidden layer -> output.
Mlp one_path(std::size_t j, const std::array<double, kMlpLayers>& w, double hidden_bias) {
  Mlp net;
  net.layers[0].w(0, j) = w[0];
  for (std::size_t l = 1; l < kMlpLayers; ++l) net.layers[l].w(0, 0) = w[l];
  for (std::size_t l = 0; l + 1 < kMlpLayers; ++l) net.layers[l].bias[0] = hidden_bias;
  return net;
}

Point random_point(Rng& rng) {
  Point x{};
  for (auto& v : x) v = rng.uniform(1.0, 254.0);
  return x;
}

}  // namespace

TEST(InputGradient, ZeroNetworkHasZeroGradient) {
  const Mlp zero;
  Rng rng(1);
  for (int k = 0; k < 20; ++k) {
    const Point g = input_gradient(zero, random_point(rng), k % 2);
    for (double v : g) EXPECT_EQ(v, 0.0);
  }
  EXPECT_EQ(finite_diff_check(zero, random_point(rng), 1, 1e-3), 0.0);
}

TEST(InputGradient, SinglePathClosedForm) {
  // A negative weight at layer 2 switches the path off entirely.
  const std::array<double, kMlpLayers> w{0.8, 1.5, -0.7, 2.0, 1.25};
  const Mlp net = one_path(3, w, 0.1);
  Point x{};
  x.fill(40.0);
  x[3] = 120.0;
  const double h0 = 0.8 * 120.0 / 255.0 + 0.1;
  const double h1 = 1.5 * h0 + 0.1;
  const double h2 = std::max(0.0, -0.7 * h1 + 0.1);
  ASSERT_EQ(h2, 0.0);
  for (int y : {0, 1}) {
    const Point g = input_gradient(net, x, y);
    for (double v : g) EXPECT_EQ(v, 0.0);
  }

  // All hidden units on the path positive: g_3 = (sigmoid(z) - y) * w_chain / 255.
  const std::array<double, kMlpLayers> pos{0.8, 1.5, 0.7, 2.0, -1.25};
  const double pos_chain = pos[0] * pos[1] * pos[2] * pos[3] * pos[4];
  const Mlp live = one_path(3, pos, 0.1);
  const double a0 = 0.8 * 120.0 / 255.0 + 0.1, a1 = 1.5 * a0 + 0.1, a2 = 0.7 * a1 + 0.1, a3 = 2.0 * a2 + 0.1;
  const double z = -1.25 * a3;
  const double s = 1.0 / (1.0 + std::exp(-z));
  for (int y : {0, 1}) {
    const Point g = input_gradient(live, x, y);
    for (std::size_t i = 0; i < kNumFeatures; ++i) {
      if (i == 3) EXPECT_NEAR(g[i], (s - y) * pos_chain / 255.0, 1e-15);
      else EXPECT_EQ(g[i], 0.0);
    }
  }
}

TEST(InputGradient, ReluSubgradientAtZeroIsZero) {
  Mlp net;
  net.layers[0].w(0, 2) = 1.0;  // pre-activation is exactly 0 at x[2] = 0
  net.layers[1].w(0, 0) = 5.0;
  net.layers[1].bias[0] = 1.0;
  net.layers[2].w(0, 0) = 1.0;
  net.layers[3].w(0, 0) = 1.0;
  net.layers[4].w(0, 0) = 1.0;
  Point x{};
  x.fill(10.0);
  x[2] = 0.0;
  const Point g = input_gradient(net, x, 0);
  EXPECT_EQ(g[2], 0.0);
}

TEST(InputGradient, MatchesCentralDifferences) {
  Rng rng(2024);
  int checked = 0;
  while (checked < 100) {
    const Mlp net = Mlp::random(rng);
    const Point x = random_point(rng);
    const int y = static_cast<int>(rng.below(2));
    if (!kink_free(net, x, 2e-3)) continue;
    ASSERT_LT(finite_diff_check(net, x, y, 1e-3), 1e-4) << "triple " << checked;
    ++checked;
  }
}

TEST(InputGradient, CoarseStepLosesAccuracy) {
  Rng rng(7);
  double coarse = 0.0, fine = 0.0;
  for (int k = 0; k < 50; ++k) {
    const Mlp net = Mlp::random(rng);
    const Point x = random_point(rng);
    if (!kink_free(net, x, 2e-3)) continue;
    fine = std::max(fine, finite_diff_check(net, x, 1, 1e-3));
    coarse = std::max(coarse, finite_diff_check(net, x, 1, 10.0));
  }
  EXPECT_LT(fine, 1e-4);
  EXPECT_GT(coarse, 1e-4);
}

TEST(InputGradient, ShrinksAsScoreApproachesLabel) {
  const Mlp net = one_path(0, {1.0, 1.0, 1.0, 1.0, 3.0}, 0.0);
  Point x{};
  double previous = INFINITY;
  for (int v = 1; v <= 255; v += 2) {
    x[0] = v;
    const double mag = std::abs(input_gradient(net, x, 1)[0]);
    ASSERT_LT(mag, previous) << "at " << v;
    previous = mag;
  }
}

TEST(InputGradient, TreeModelsAreNotDifferentiable) {
  Tree t;
  t.nodes.push_back({});
  const ClassifierModel dt(ModelKind::DecisionTree, t);
  try {
    input_gradient(dt, FeatureVector{}, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NotDifferentiable);
  }
  const ClassifierModel mlp(ModelKind::Mlp, Mlp{});
  EXPECT_NO_THROW(input_gradient(mlp, FeatureVector{}, 0));
}
