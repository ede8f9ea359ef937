#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "canids/dataset.hpp"
#include "canids/frame_codec.hpp"
#include "canids/rng.hpp"

namespace canids {

/// Flat binary tree over the eight byte features. Internal nodes send
/// x[feature] <= threshold to the left child.
struct Tree {
  struct Node {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf payload: class-1 fraction, or boosting weight

    bool is_leaf() const noexcept { return feature < 0; }
    friend bool operator==(const Node&, const Node&) = default;
  };

  std::vector<Node> nodes;

  const Node& leaf_for(const Point& x) const noexcept {
    std::size_t i = 0;
    while (!nodes[i].is_leaf())
      i = static_cast<std::size_t>(x[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold
                                       ? nodes[i].left
                                       : nodes[i].right);
    return nodes[i];
  }

  double value(const Point& x) const noexcept { return leaf_for(x).value; }

  /// Majority label of the leaf reached; ties go to benign.
  int vote(const Point& x) const noexcept { return value(x) > 0.5 ? 1 : 0; }

  std::size_t depth() const {
    std::size_t best = 0;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{0, 0}};
    while (!stack.empty()) {
      auto [i, d] = stack.back();
      stack.pop_back();
      best = std::max(best, d);
      if (!nodes[i].is_leaf()) {
        stack.push_back({static_cast<std::size_t>(nodes[i].left), d + 1});
        stack.push_back({static_cast<std::size_t>(nodes[i].right), d + 1});
      }
    }
    return best;
  }

  friend bool operator==(const Tree&, const Tree&) = default;
};

/// Column-friendly copy of a dataset for training.
struct TrainingData {
  std::vector<FeatureVector> x;
  std::vector<std::uint8_t> y;

  explicit TrainingData(const Dataset& ds) {
    x.reserve(ds.size());
    y.reserve(ds.size());
    for (const auto& r : ds) {
      x.push_back(r.features);
      y.push_back(r.label);
    }
  }
  std::size_t size() const noexcept { return y.size(); }
};

enum class SplitRule : std::uint8_t {
  Best,    // exhaustive Gini search over midpoints of observed values
  Random,  // one uniform threshold in [min, max) per candidate feature
};

struct TreeOptions {
  int max_depth = 16;
  std::size_t min_samples_split = 2;
  std::size_t features_per_split = kNumFeatures;
  SplitRule rule = SplitRule::Best;
};

namespace detail {

using ClassHistogram = std::array<std::array<std::uint32_t, 2>, 256>;

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double score = -1.0;
};

/// Sum over children of (c0^2 + c1^2) / n; larger means lower weighted Gini.
inline double gini_score(double l0, double l1, double r0, double r1) noexcept {
  const double nl = l0 + l1, nr = r0 + r1;
  return (l0 * l0 + l1 * l1) / nl + (r0 * r0 + r1 * r1) / nr;
}

class ClassificationTreeBuilder {
 public:
  ClassificationTreeBuilder(const TrainingData& data, const TreeOptions& opts, Rng& rng)
      : data_(data), opts_(opts), rng_(rng) {}

  Tree build(std::vector<std::uint32_t> samples) {
    samples_ = std::move(samples);
    tree_.nodes.clear();
    grow(0, samples_.size(), 0);
    return std::move(tree_);
  }

 private:
  int grow(std::size_t begin, std::size_t end, int depth) {
    const int id = static_cast<int>(tree_.nodes.size());
    tree_.nodes.emplace_back();

    std::size_t positives = 0;
    for (std::size_t i = begin; i < end; ++i) positives += data_.y[samples_[i]];
    const std::size_t n = end - begin;
    tree_.nodes[id].value = n ? static_cast<double>(positives) / static_cast<double>(n) : 0.0;

    if (depth >= opts_.max_depth || n < opts_.min_samples_split || positives == 0 || positives == n) return id;

    const SplitChoice split = choose_split(begin, end);
    if (split.feature < 0) return id;

    const auto f = static_cast<std::size_t>(split.feature);
    auto mid_it = std::partition(samples_.begin() + static_cast<std::ptrdiff_t>(begin),
                                 samples_.begin() + static_cast<std::ptrdiff_t>(end),
                                 [&](std::uint32_t s) { return data_.x[s][f] <= split.threshold; });
    const auto mid = static_cast<std::size_t>(mid_it - samples_.begin());

    tree_.nodes[id].feature = split.feature;
    tree_.nodes[id].threshold = split.threshold;
    const int left = grow(begin, mid, depth + 1);
    const int right = grow(mid, end, depth + 1);
    tree_.nodes[id].left = left;
    tree_.nodes[id].right = right;
    return id;
  }

  SplitChoice choose_split(std::size_t begin, std::size_t end) {
    std::array<int, kNumFeatures> order{};
    std::iota(order.begin(), order.end(), 0);
    rng_.shuffle(std::span<int>(order));

    SplitChoice best;
    std::size_t evaluated = 0;
    for (int f : order) {
      if (evaluated >= opts_.features_per_split) break;
      ClassHistogram hist{};
      for (std::size_t i = begin; i < end; ++i) {
        const auto s = samples_[i];
        ++hist[data_.x[s][static_cast<std::size_t>(f)]][data_.y[s]];
      }
      int lo = 0, hi = 255;
      while (lo < 256 && hist[lo][0] + hist[lo][1] == 0) ++lo;
      while (hi >= 0 && hist[hi][0] + hist[hi][1] == 0) --hi;
      if (lo >= hi) continue;  // constant in this node; does not count toward the budget
      ++evaluated;

      double t0 = 0, t1 = 0;
      for (int v = lo; v <= hi; ++v) {
        t0 += hist[v][0];
        t1 += hist[v][1];
      }

      if (opts_.rule == SplitRule::Random) {
        const double threshold = rng_.uniform(lo, hi);
        double l0 = 0, l1 = 0;
        for (int v = lo; v <= hi && v <= threshold; ++v) {
          l0 += hist[v][0];
          l1 += hist[v][1];
        }
        const double score = gini_score(l0, l1, t0 - l0, t1 - l1);
        if (score > best.score) best = {f, threshold, score};
        continue;
      }

      double l0 = 0, l1 = 0;
      int v = lo;
      while (v < hi) {
        l0 += hist[v][0];
        l1 += hist[v][1];
        int next = v + 1;
        while (hist[next][0] + hist[next][1] == 0) ++next;
        const double score = gini_score(l0, l1, t0 - l0, t1 - l1);
        if (score > best.score) best = {f, 0.5 * (v + next), score};
        v = next;
      }
    }
    return best;
  }

  const TrainingData& data_;
  const TreeOptions& opts_;
  Rng& rng_;
  std::vector<std::uint32_t> samples_;
  Tree tree_;
};

}  // namespace detail

/// Grow one CART classification tree on the given (possibly repeated) sample
/// indices. Leaves store the class-1 fraction of their samples.
inline Tree grow_classification_tree(const TrainingData& data, std::vector<std::uint32_t> samples,
                                     const TreeOptions& opts, Rng& rng) {
  detail::ClassificationTreeBuilder builder(data, opts, rng);
  return builder.build(std::move(samples));
}

}  // namespace canids
