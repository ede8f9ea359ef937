#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include <json.hpp>

#include "canids/dataset.hpp"
#include "canids/error.hpp"
#include "canids/metrics.hpp"
#include "canids/models/boosting.hpp"
#include "canids/models/forest.hpp"
#include "canids/models/mlp.hpp"
#include "canids/models/tree.hpp"

namespace canids {

enum class ModelKind : std::uint8_t { DecisionTree, RandomForest, ExtraTrees, GradientBoostedTrees, Mlp };

inline constexpr std::array<ModelKind, 5> kAllModelKinds = {ModelKind::DecisionTree, ModelKind::RandomForest,
                                                            ModelKind::ExtraTrees, ModelKind::GradientBoostedTrees,
                                                            ModelKind::Mlp};

/// Short CLI names: dt, rf, et, gbt, mlp.
constexpr std::string_view to_string(ModelKind k) noexcept {
  switch (k) {
    case ModelKind::DecisionTree: return "dt";
    case ModelKind::RandomForest: return "rf";
    case ModelKind::ExtraTrees: return "et";
    case ModelKind::GradientBoostedTrees: return "gbt";
    case ModelKind::Mlp: return "mlp";
  }
  return "?";
}

/// Report labels in the usual table order.
constexpr std::string_view display_name(ModelKind k) noexcept {
  switch (k) {
    case ModelKind::DecisionTree: return "DT";
    case ModelKind::RandomForest: return "RF";
    case ModelKind::ExtraTrees: return "ET";
    case ModelKind::GradientBoostedTrees: return "XGB";
    case ModelKind::Mlp: return "DNN";
  }
  return "?";
}

inline std::optional<ModelKind> parse_model_kind(std::string_view text) noexcept {
  for (auto k : kAllModelKinds)
    if (to_string(k) == text) return k;
  return std::nullopt;
}

struct Hyperparams {
  TreeOptions dt = decision_tree_defaults();
  ForestOptions rf = random_forest_defaults();
  ForestOptions et = extra_trees_defaults();
  BoostingOptions gbt;
  MlpOptions mlp;
  double threshold = 0.5;
};

/// One trained IDS. predict(x) = 1 iff score(x) > threshold.
class ClassifierModel {
 public:
  using Params = std::variant<Tree, Forest, BoostedTrees, Mlp>;

  ClassifierModel(ModelKind kind, Params params, double threshold = 0.5)
      : kind_(kind), params_(std::move(params)), threshold_(threshold) {}

  ModelKind kind() const noexcept { return kind_; }
  double threshold() const noexcept { return threshold_; }
  const Params& params() const noexcept { return params_; }
  bool differentiable() const noexcept { return kind_ == ModelKind::Mlp; }

  /// The differentiable surrogate view; NotDifferentiable for tree models.
  const Mlp& mlp() const {
    if (const auto* m = std::get_if<Mlp>(&params_)) return *m;
    throw Error(ErrorCode::NotDifferentiable, std::string(to_string(kind_)) + " has no input gradient");
  }

  double score(const Point& x) const noexcept {
    return std::visit(
        [&](const auto& p) -> double {
          using T = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<T, Tree>) return p.value(x);
          else return p.score(x);
        },
        params_);
  }
  double score(const FeatureVector& x) const noexcept { return score(to_point(x)); }

  int predict(const Point& x) const noexcept { return score(x) > threshold_ ? 1 : 0; }
  int predict(const FeatureVector& x) const noexcept { return predict(to_point(x)); }

  friend bool operator==(const ClassifierModel&, const ClassifierModel&) = default;

 private:
  ModelKind kind_;
  Params params_;
  double threshold_;
};

inline ClassifierModel train(ModelKind kind, const Dataset& train_set, const Hyperparams& hp, std::uint64_t seed) {
  if (train_set.benign_count() == 0 || train_set.malicious_count() == 0)
    throw Error(ErrorCode::ClassAbsent, "training set needs both classes");
  const TrainingData data(train_set);
  switch (kind) {
    case ModelKind::DecisionTree: return {kind, train_decision_tree(data, hp.dt, seed), hp.threshold};
    case ModelKind::RandomForest: return {kind, train_forest(data, hp.rf, seed), hp.threshold};
    case ModelKind::ExtraTrees: return {kind, train_forest(data, hp.et, seed), hp.threshold};
    case ModelKind::GradientBoostedTrees: return {kind, train_boosted_trees(data, hp.gbt), hp.threshold};
    case ModelKind::Mlp: return {kind, train_mlp(data, hp.mlp, seed), hp.threshold};
  }
  throw Error(ErrorCode::InvalidArgument, "unknown model kind");
}

inline int predict(const ClassifierModel& model, const FeatureVector& x) noexcept { return model.predict(x); }
inline double score(const ClassifierModel& model, const FeatureVector& x) noexcept { return model.score(x); }

/// Confusion matrix of the model over the dataset, records in order.
inline ConfusionMatrix evaluate(const ClassifierModel& model, const Dataset& ds) {
  if (ds.empty()) throw Error(ErrorCode::EmptySlice, "evaluate on an empty dataset");
  ConfusionMatrix cm;
  for (const auto& r : ds) cm.add(r.label, model.predict(r.features));
  return cm;
}

// ---------------------------------------------------------------------------
// Persistence
// ---------------------------------------------------------------------------
//
// JSON document, version 1:
//   { "format": "canids-model", "version": 1, "kind": "rf", "threshold": 0.5,
//     "params": <kind-specific> }
// trees:   {"feature":[..], "threshold":[..], "left":[..], "right":[..], "value":[..]}
// dt:      <tree>
// rf, et:  {"trees": [<tree>, ...]}
// gbt:     {"base_margin": m, "trees": [<tree>, ...]}
// mlp:     {"layers": [{"in":8, "out":16, "weights":[..row-major..], "bias":[..]}, ...]}
// Doubles are written with round-trip precision, so a reload scores bit-identically.

inline constexpr int kModelFormatVersion = 1;

namespace detail {

inline nlohmann::json tree_to_json(const Tree& t) {
  nlohmann::json j;
  auto& feature = j["feature"] = nlohmann::json::array();
  auto& threshold = j["threshold"] = nlohmann::json::array();
  auto& left = j["left"] = nlohmann::json::array();
  auto& right = j["right"] = nlohmann::json::array();
  auto& value = j["value"] = nlohmann::json::array();
  for (const auto& n : t.nodes) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(n.value);
  }
  return j;
}

inline Tree tree_from_json(const nlohmann::json& j) {
  Tree t;
  const auto& feature = j.at("feature");
  const std::size_t n = feature.size();
  if (n == 0 || j.at("threshold").size() != n || j.at("left").size() != n || j.at("right").size() != n ||
      j.at("value").size() != n)
    throw Error(ErrorCode::SchemaMismatch, "tree arrays differ in length");
  t.nodes.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto& node = t.nodes[i];
    node.feature = feature[i].get<int>();
    node.threshold = j["threshold"][i].get<double>();
    node.left = j["left"][i].get<int>();
    node.right = j["right"][i].get<int>();
    node.value = j["value"][i].get<double>();
    if (node.feature >= static_cast<int>(kNumFeatures))
      throw Error(ErrorCode::SchemaMismatch, "split feature out of range");
    if (!node.is_leaf() && (node.left <= static_cast<int>(i) || node.right <= static_cast<int>(i) ||
                            node.left >= static_cast<int>(n) || node.right >= static_cast<int>(n)))
      throw Error(ErrorCode::SchemaMismatch, "bad child index");
  }
  return t;
}

inline nlohmann::json trees_to_json(const std::vector<Tree>& trees) {
  auto arr = nlohmann::json::array();
  for (const auto& t : trees) arr.push_back(tree_to_json(t));
  return arr;
}

inline std::vector<Tree> trees_from_json(const nlohmann::json& j) {
  std::vector<Tree> trees;
  for (const auto& t : j) trees.push_back(tree_from_json(t));
  if (trees.empty()) throw Error(ErrorCode::SchemaMismatch, "ensemble has no trees");
  return trees;
}

}  // namespace detail

inline nlohmann::json model_to_json(const ClassifierModel& model) {
  nlohmann::json j;
  j["format"] = "canids-model";
  j["version"] = kModelFormatVersion;
  j["kind"] = std::string(to_string(model.kind()));
  j["threshold"] = model.threshold();
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, Tree>) {
          j["params"] = detail::tree_to_json(p);
        } else if constexpr (std::is_same_v<T, Forest>) {
          j["params"]["trees"] = detail::trees_to_json(p.trees);
        } else if constexpr (std::is_same_v<T, BoostedTrees>) {
          j["params"]["base_margin"] = p.base_margin;
          j["params"]["trees"] = detail::trees_to_json(p.trees);
        } else {
          auto layers = nlohmann::json::array();
          for (const auto& l : p.layers)
            layers.push_back({{"in", l.in}, {"out", l.out}, {"weights", l.weights}, {"bias", l.bias}});
          j["params"]["layers"] = layers;
        }
      },
      model.params());
  return j;
}

inline ClassifierModel model_from_json(const nlohmann::json& j) {
  try {
    if (j.at("format") != "canids-model") throw Error(ErrorCode::SchemaMismatch, "not a canids model file");
    if (j.at("version").get<int>() != kModelFormatVersion)
      throw Error(ErrorCode::SchemaMismatch, "unsupported model version");
    const auto kind = parse_model_kind(j.at("kind").get<std::string>());
    if (!kind) throw Error(ErrorCode::SchemaMismatch, "unknown model kind");
    const double threshold = j.at("threshold").get<double>();
    const auto& p = j.at("params");
    switch (*kind) {
      case ModelKind::DecisionTree: return {*kind, detail::tree_from_json(p), threshold};
      case ModelKind::RandomForest:
      case ModelKind::ExtraTrees: return {*kind, Forest{detail::trees_from_json(p.at("trees"))}, threshold};
      case ModelKind::GradientBoostedTrees:
        return {*kind, BoostedTrees{p.at("base_margin").get<double>(), detail::trees_from_json(p.at("trees"))},
                threshold};
      case ModelKind::Mlp: {
        Mlp net;
        const auto& layers = p.at("layers");
        if (layers.size() != kMlpLayers) throw Error(ErrorCode::SchemaMismatch, "MLP must have 5 dense layers");
        for (std::size_t l = 0; l < kMlpLayers; ++l) {
          auto& dst = net.layers[l];
          if (layers[l].at("in").get<std::size_t>() != dst.in || layers[l].at("out").get<std::size_t>() != dst.out)
            throw Error(ErrorCode::SchemaMismatch, "MLP layer shape mismatch");
          dst.weights = layers[l].at("weights").get<std::vector<double>>();
          dst.bias = layers[l].at("bias").get<std::vector<double>>();
          if (dst.weights.size() != dst.in * dst.out || dst.bias.size() != dst.out)
            throw Error(ErrorCode::SchemaMismatch, "MLP parameter count mismatch");
        }
        return {*kind, std::move(net), threshold};
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, e.what());
  }
  throw Error(ErrorCode::SchemaMismatch, "unknown model kind");
}

inline void save_model(const ClassifierModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path);
  out << model_to_json(model).dump() << "\n";
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path);
}

inline ClassifierModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string("model file: ") + e.what());
  }
  return model_from_json(j);
}

}  // namespace canids
