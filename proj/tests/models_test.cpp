#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

#include "canids/models/classifier.hpp"

using namespace canids;

namespace {

// benign d0 < 100, malicious d0 >= 200, remaining bytes uniform noise.
Dataset toy_separable(std::size_t per_class, std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds;
  for (std::size_t i = 0; i < 2 * per_class; ++i) {
    LabeledRecord r;
    r.label = i % 2 ? 1 : 0;
    for (auto& b : r.features) b = static_cast<std::uint8_t>(rng.below(256));
    r.features[0] = static_cast<std::uint8_t>(r.label ? 200 + rng.below(56) : rng.below(100));
    ds.add(r);
  }
  return ds;
}

std::vector<FeatureVector> probes(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<FeatureVector> out(n);
  for (auto& x : out)
    for (auto& b : x) b = static_cast<std::uint8_t>(rng.below(256));
  return out;
}

Hyperparams small_hyperparams() {
  Hyperparams hp;
  hp.rf.n_trees = 20;
  hp.et.n_trees = 20;
  hp.gbt.n_trees = 30;
  return hp;
}

ClassifierModel leaf_model(double value, double threshold = 0.5) {
  Tree t;
  t.nodes.push_back({});
  t.nodes[0].value = value;
  return {ModelKind::DecisionTree, t, threshold};
}

// Independent recursive walk used as the reference for Tree::leaf_for.
double naive_eval(const Tree& t, int node, const Point& x) {
  const auto& n = t.nodes[static_cast<std::size_t>(node)];
  if (n.feature < 0) return n.value;
  return x[static_cast<std::size_t>(n.feature)] <= n.threshold ? naive_eval(t, n.left, x) : naive_eval(t, n.right, x);
}

int grow_random(Tree& t, Rng& rng, int depth) {
  const int id = static_cast<int>(t.nodes.size());
  t.nodes.emplace_back();
  if (depth == 0 || rng.below(4) == 0) {
    t.nodes[id].value = rng.uniform01();
    return id;
  }
  t.nodes[id].feature = static_cast<int>(rng.below(8));
  t.nodes[id].threshold = static_cast<double>(rng.below(255)) + 0.5;
  const int l = grow_random(t, rng, depth - 1);
  const int r = grow_random(t, rng, depth - 1);
  t.nodes[id].left = l;
  t.nodes[id].right = r;
  return id;
}

}  // namespace

TEST(Train, ToySeparableReachesPerfectTrainAccuracy) {
  const Dataset ds = toy_separable(1000, 1);
  // 2000 samples give only 8 mini-batches per epoch, so the MLP gets 50 epochs here.
  Hyperparams hp;
  hp.mlp.epochs = 50;
  for (ModelKind kind : kAllModelKinds) {
    const ClassifierModel m = train(kind, ds, hp, 3);
    const ConfusionMatrix cm = evaluate(m, ds);
    EXPECT_EQ(cm.tp + cm.tn, ds.size()) << display_name(kind) << " fp=" << cm.fp << " fn=" << cm.fn;
  }
}

TEST(Train, SingleClassIsRejected) {
  const Dataset benign = toy_separable(50, 2).with_label(0);
  for (ModelKind kind : kAllModelKinds) {
    try {
      train(kind, benign, Hyperparams{}, 1);
      FAIL() << display_name(kind);
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), ErrorCode::ClassAbsent);
    }
  }
}

TEST(Train, SameSeedSamePredictions) {
  const Dataset ds = toy_separable(300, 3);
  const auto probe = probes(500, 4);
  for (ModelKind kind : kAllModelKinds) {
    const auto a = train(kind, ds, small_hyperparams(), 9), b = train(kind, ds, small_hyperparams(), 9);
    EXPECT_EQ(a, b) << display_name(kind);
    for (const auto& x : probe) ASSERT_EQ(a.score(x), b.score(x));
  }
}

TEST(Train, DivergentMlpRaisesNonFiniteLoss) {
  Hyperparams hp;
  hp.mlp.learning_rate = 1e300;
  hp.mlp.epochs = 3;
  try {
    train(ModelKind::Mlp, toy_separable(300, 5), hp, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteLoss);
  }
}

TEST(Predict, ThresholdAndTieRule) {
  const FeatureVector x{};
  EXPECT_EQ(leaf_model(0.9).predict(x), 1);
  EXPECT_EQ(leaf_model(0.5).predict(x), 0);
  EXPECT_EQ(leaf_model(0.0).predict(x), 0);
  EXPECT_EQ(leaf_model(0.7, 0.8).predict(x), 0);
  for (const auto& p : probes(100, 1)) EXPECT_EQ(predict(leaf_model(0.0), p), 0);
}

TEST(Score, ForestIsMeanOfVotes) {
  Forest f;
  for (double v : {1.0, 1.0, 0.0, 0.0}) {
    Tree t;
    t.nodes.push_back({});
    t.nodes[0].value = v;
    f.trees.push_back(t);
  }
  const ClassifierModel m(ModelKind::RandomForest, f);
  EXPECT_EQ(m.score(FeatureVector{}), 0.5);
  EXPECT_EQ(m.predict(FeatureVector{}), 0);
}

TEST(Score, BoostingZeroMarginIsHalf) {
  const ClassifierModel m(ModelKind::GradientBoostedTrees, BoostedTrees{0.0, {}});
  EXPECT_EQ(m.score(FeatureVector{1, 2, 3, 4, 5, 6, 7, 8}), 0.5);
}

TEST(Score, ZeroMlpIsHalf) {
  const ClassifierModel m(ModelKind::Mlp, Mlp{});
  for (const auto& x : probes(50, 2)) EXPECT_EQ(m.score(x), 0.5);
}

TEST(Score, MlpActivationsNonNegativeAndOutputOpen) {
  Rng rng(8);
  for (int k = 0; k < 50; ++k) {
    const Mlp net = Mlp::random(rng);
    for (const auto& x : probes(50, static_cast<std::uint64_t>(k))) {
      const MlpTrace t = net.trace(to_point(x));
      for (const auto& h : t.hidden)
        for (double a : h) ASSERT_GE(a, 0.0);
      ASSERT_GT(t.output, 0.0);
      ASSERT_LT(t.output, 1.0);
    }
  }
}

TEST(Score, EnsembleScoreIndependentOfTreeOrder) {
  const Dataset ds = toy_separable(300, 6);
  const auto hp = small_hyperparams();
  const auto rf = train(ModelKind::RandomForest, ds, hp, 2);
  const auto gbt = train(ModelKind::GradientBoostedTrees, ds, hp, 2);
  Forest rev = std::get<Forest>(rf.params());
  std::reverse(rev.trees.begin(), rev.trees.end());
  for (const auto& x : probes(300, 7)) EXPECT_EQ(rf.score(x), rev.score(to_point(x)));
  // Boosting sums in tree-index order; recompute that order by hand.
  const auto& bt = std::get<BoostedTrees>(gbt.params());
  for (const auto& x : probes(300, 8)) {
    double m = bt.base_margin;
    for (const auto& t : bt.trees) m += t.value(to_point(x));
    EXPECT_EQ(gbt.score(x), sigmoid(m));
  }
}

TEST(Evaluate, PerfectModel) {
  const Dataset ds = toy_separable(10, 9);
  Tree t;
  t.nodes = {{0, 150.0, 1, 2, 0.0}, {}, {}};
  t.nodes[2].value = 1.0;
  const ClassifierModel m(ModelKind::DecisionTree, t);
  EXPECT_EQ(evaluate(m, ds), (ConfusionMatrix{10, 10, 0, 0}));
}

TEST(Evaluate, AlwaysBenignOnTableTwoComposition) {
  Dataset ds;
  ds.reserve(450554 + 14899);
  for (std::size_t i = 0; i < 450554 + 14899; ++i) ds.add({{}, static_cast<std::uint8_t>(i < 450554 ? 0 : 1)});
  const ConfusionMatrix cm = evaluate(leaf_model(0.0), ds);
  EXPECT_EQ(cm.fp, 0u);
  EXPECT_EQ(cm.fn, 14899u);
  EXPECT_EQ(cm.total(), ds.size());
  EXPECT_THROW(evaluate(leaf_model(0.0), Dataset{}), Error);
}

TEST(Evaluate, MatchesRecountOfOwnPredictions) {
  const Dataset train_set = toy_separable(200, 10);
  Dataset noisy;
  Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    LabeledRecord r;
    for (auto& b : r.features) b = static_cast<std::uint8_t>(rng.below(256));
    r.label = static_cast<std::uint8_t>(rng.below(2));
    noisy.add(r);
  }
  for (ModelKind kind : kAllModelKinds) {
    const auto m = train(kind, train_set, small_hyperparams(), 12);
    std::vector<int> truth, pred;
    for (const auto& r : noisy) {
      truth.push_back(r.label);
      pred.push_back(predict(m, r.features));
    }
    EXPECT_EQ(evaluate(m, noisy), count_confusion(truth, pred));
  }
}

TEST(DecisionTree, LeafForMatchesNaiveInterpreter) {
  Rng rng(13);
  for (int k = 0; k < 200; ++k) {
    Tree t;
    grow_random(t, rng, 8);
    for (const auto& x : probes(100, static_cast<std::uint64_t>(k))) {
      const Point p = to_point(x);
      ASSERT_EQ(t.value(p), naive_eval(t, 0, p));
    }
  }
}

TEST(DecisionTree, TrainedTreeInvariants) {
  const auto m = train(ModelKind::DecisionTree, toy_separable(500, 14), Hyperparams{}, 1);
  const Tree& t = std::get<Tree>(m.params());
  EXPECT_LE(t.depth(), 16u);
  for (const auto& n : t.nodes) {
    EXPECT_LT(n.feature, 8);
    EXPECT_TRUE(std::isfinite(n.value));
  }
}

TEST(Forest, ExtraTreesEqualsRandomForestWithKnobsEqualized) {
  const Dataset ds = toy_separable(300, 15);
  for (bool bootstrap : {false, true}) {
    for (SplitRule rule : {SplitRule::Best, SplitRule::Random}) {
      Hyperparams hp = small_hyperparams();
      hp.rf.bootstrap = hp.et.bootstrap = bootstrap;
      hp.rf.tree.rule = hp.et.tree.rule = rule;
      const auto rf = train(ModelKind::RandomForest, ds, hp, 21);
      const auto et = train(ModelKind::ExtraTrees, ds, hp, 21);
      EXPECT_EQ(std::get<Forest>(rf.params()), std::get<Forest>(et.params()));
    }
  }
  // With the default knobs the two trainers must actually differ.
  const auto rf = train(ModelKind::RandomForest, ds, small_hyperparams(), 21);
  const auto et = train(ModelKind::ExtraTrees, ds, small_hyperparams(), 21);
  EXPECT_NE(std::get<Forest>(rf.params()), std::get<Forest>(et.params()));
}

TEST(Persistence, ReloadScoresBitIdentical) {
  const Dataset ds = toy_separable(300, 16);
  const auto probe = probes(1000, 17);
  const auto path = (std::filesystem::temp_directory_path() / "canids_model_test.json").string();
  for (ModelKind kind : kAllModelKinds) {
    const auto m = train(kind, ds, small_hyperparams(), 5);
    save_model(m, path);
    const auto back = load_model(path);
    EXPECT_EQ(back, m) << display_name(kind);
    for (const auto& x : probe) ASSERT_EQ(back.score(x), m.score(x));
  }
  std::filesystem::remove(path);
}

TEST(Persistence, RejectsForeignDocuments) {
  EXPECT_THROW(model_from_json(nlohmann::json{{"format", "other"}}), Error);
  auto j = model_to_json(leaf_model(0.3));
  j["version"] = 99;
  EXPECT_THROW(model_from_json(j), Error);
  j = model_to_json(leaf_model(0.3));
  j["params"]["left"] = {5};
  j["params"]["feature"] = {2};
  EXPECT_THROW(model_from_json(j), Error);
  EXPECT_THROW(load_model("/nonexistent/model.json"), Error);
}

TEST(Classifier, OnlyMlpIsDifferentiable) {
  EXPECT_THROW(leaf_model(0.1).mlp(), Error);
  const ClassifierModel m(ModelKind::Mlp, Mlp{});
  EXPECT_TRUE(m.differentiable());
  EXPECT_NO_THROW(m.mlp());
}
