#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

#include "canids/detail/parallel.hpp"
#include "canids/models/tree.hpp"
#include "canids/rng.hpp"

namespace canids {

struct ForestOptions {
  std::size_t n_trees = 100;
  TreeOptions tree{16, 2, 3, SplitRule::Best};
  bool bootstrap = true;

  friend bool operator==(const ForestOptions&, const ForestOptions&) = default;
};

inline ForestOptions random_forest_defaults() { return {100, {16, 2, 3, SplitRule::Best}, true}; }
inline ForestOptions extra_trees_defaults() { return {100, {16, 2, 3, SplitRule::Random}, false}; }

/// Bagged tree ensemble. Score is the mean of the trees' majority votes,
/// summed in tree-index order.
struct Forest {
  std::vector<Tree> trees;

  double score(const Point& x) const noexcept {
    std::size_t votes = 0;
    for (const auto& t : trees) votes += static_cast<std::size_t>(t.vote(x));
    return trees.empty() ? 0.0 : static_cast<double>(votes) / static_cast<double>(trees.size());
  }

  friend bool operator==(const Forest&, const Forest&) = default;
};

/// Shared trainer for random forests and extra trees; the two differ only in
/// `bootstrap` and `tree.rule`. Tree t draws everything (bootstrap sample,
/// feature order, thresholds) from stream derive_seed(seed, t), so trees
/// can be grown concurrently without changing the result.
inline Forest train_forest(const TrainingData& data, const ForestOptions& opts, std::uint64_t seed) {
  Forest forest;
  forest.trees.resize(opts.n_trees);
  const auto n = static_cast<std::uint32_t>(data.size());
  detail::parallel_for(opts.n_trees, [&](std::size_t t) {
    Rng rng(derive_seed(seed, t));
    std::vector<std::uint32_t> samples(n);
    if (opts.bootstrap) {
      for (auto& s : samples) s = static_cast<std::uint32_t>(rng.below(n));
    } else {
      std::iota(samples.begin(), samples.end(), 0u);
    }
    forest.trees[t] = grow_classification_tree(data, std::move(samples), opts.tree, rng);
  });
  return forest;
}

inline TreeOptions decision_tree_defaults() { return {16, 2, kNumFeatures, SplitRule::Best}; }

/// Single tree on all samples; scores with the leaf's class-1 fraction.
inline Tree train_decision_tree(const TrainingData& data, const TreeOptions& opts, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0));
  std::vector<std::uint32_t> samples(data.size());
  std::iota(samples.begin(), samples.end(), 0u);
  return grow_classification_tree(data, std::move(samples), opts, rng);
}

}  // namespace canids
