#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "canids/error.hpp"
#include "canids/models/tree.hpp"

namespace canids {

struct BoostingOptions {
  std::size_t n_trees = 200;
  int max_depth = 6;
  double learning_rate = 0.1;
  double l2 = 1.0;                // lambda on leaf weights
  double min_child_weight = 1.0;  // minimum hessian sum per child

  friend bool operator==(const BoostingOptions&, const BoostingOptions&) = default;
};

inline double sigmoid(double z) noexcept {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

/// Gradient-boosted regression trees on the logistic loss. Leaf values
/// already include the learning rate; score = sigmoid(base + sum of leaves)
/// with the sum taken in tree order.
struct BoostedTrees {
  double base_margin = 0.0;
  std::vector<Tree> trees;

  double margin(const Point& x) const noexcept {
    double m = base_margin;
    for (const auto& t : trees) m += t.value(x);
    return m;
  }

  double score(const Point& x) const noexcept { return sigmoid(margin(x)); }

  friend bool operator==(const BoostedTrees&, const BoostedTrees&) = default;
};

namespace detail {

struct GradPair {
  double g = 0.0;
  double h = 0.0;
};

class BoostingTreeBuilder {
 public:
  BoostingTreeBuilder(const TrainingData& data, const std::vector<GradPair>& grad, const BoostingOptions& opts)
      : data_(data), grad_(grad), opts_(opts) {}

  Tree build() {
    samples_.resize(data_.size());
    std::iota(samples_.begin(), samples_.end(), 0u);
    tree_.nodes.clear();
    grow(0, samples_.size(), 0);
    return std::move(tree_);
  }

 private:
  double leaf_weight(double g, double h) const noexcept { return -opts_.learning_rate * g / (h + opts_.l2); }
  double structure_score(double g, double h) const noexcept { return g * g / (h + opts_.l2); }

  int grow(std::size_t begin, std::size_t end, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    double g = 0, h = 0;
    for (std::size_t i = begin; i < end; ++i) {
      g += grad_[samples_[i]].g;
      h += grad_[samples_[i]].h;
    }
    tree_.nodes[id].value = leaf_weight(g, h);
    if (depth >= opts_.max_depth || end - begin < 2) return id;

    const double parent = structure_score(g, h);
    int best_f = -1;
    double best_thr = 0.0, best_gain = 0.0;
    for (std::size_t f = 0; f < kNumFeatures; ++f) {
      std::array<GradPair, 256> hist{};
      std::array<std::uint32_t, 256> count{};
      for (std::size_t i = begin; i < end; ++i) {
        const auto s = samples_[i];
        const auto v = data_.x[s][f];
        hist[v].g += grad_[s].g;
        hist[v].h += grad_[s].h;
        ++count[v];
      }
      int lo = 0, hi = 255;
      while (lo < 256 && count[lo] == 0) ++lo;
      while (hi >= 0 && count[hi] == 0) --hi;
      if (lo >= hi) continue;

      double gl = 0, hl = 0;
      int v = lo;
      while (v < hi) {
        gl += hist[v].g;
        hl += hist[v].h;
        int next = v + 1;
        while (count[next] == 0) ++next;
        const double gr = g - gl, hr = h - hl;
        if (hl >= opts_.min_child_weight && hr >= opts_.min_child_weight) {
          const double gain = structure_score(gl, hl) + structure_score(gr, hr) - parent;
          if (gain > best_gain) {
            best_gain = gain;
            best_f = static_cast<int>(f);
            best_thr = 0.5 * (v + next);
          }
        }
        v = next;
      }
    }
    if (best_f < 0) return id;

    const auto f = static_cast<std::size_t>(best_f);
    auto mid_it = std::partition(samples_.begin() + static_cast<std::ptrdiff_t>(begin),
                                 samples_.begin() + static_cast<std::ptrdiff_t>(end),
                                 [&](std::uint32_t s) { return data_.x[s][f] <= best_thr; });
    const auto mid = static_cast<std::size_t>(mid_it - samples_.begin());
    tree_.nodes[id].feature = best_f;
    tree_.nodes[id].threshold = best_thr;
    const int left = grow(begin, mid, depth + 1);
    const int right = grow(mid, end, depth + 1);
    tree_.nodes[id].left = left;
    tree_.nodes[id].right = right;
    return id;
  }

  const TrainingData& data_;
  const std::vector<GradPair>& grad_;
  const BoostingOptions& opts_;
  std::vector<std::uint32_t> samples_;
  Tree tree_;
};

}  // namespace detail

/// Newton boosting: each round fits a depth-limited tree to the logistic
/// gradients g = p - y and hessians h = p(1 - p) with leaf weight
/// -lr * G / (H + l2). The base margin is the log-odds of the class prior.
inline BoostedTrees train_boosted_trees(const TrainingData& data, const BoostingOptions& opts) {
  std::size_t positives = 0;
  for (auto y : data.y) positives += y;
  const std::size_t n = data.size();
  if (positives == 0 || positives == n) throw Error(ErrorCode::ClassAbsent, "boosting needs both classes");

  BoostedTrees model;
  model.base_margin = std::log(static_cast<double>(positives) / static_cast<double>(n - positives));
  std::vector<double> margin(n, model.base_margin);
  std::vector<detail::GradPair> grad(n);
  std::vector<Point> points(n);
  for (std::size_t i = 0; i < n; ++i) points[i] = to_point(data.x[i]);

  model.trees.reserve(opts.n_trees);
  for (std::size_t round = 0; round < opts.n_trees; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(margin[i]);
      grad[i] = {p - data.y[i], std::max(p * (1.0 - p), 1e-16)};
    }
    detail::BoostingTreeBuilder builder(data, grad, opts);
    Tree tree = builder.build();
    for (std::size_t i = 0; i < n; ++i) margin[i] += tree.value(points[i]);
    model.trees.push_back(std::move(tree));
  }
  return model;
}

}  // namespace canids
