#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "canids/attacks.hpp"
#include "canids/dataset.hpp"
#include "canids/error.hpp"
#include "canids/frame_codec.hpp"
#include "canids/metrics.hpp"
#include "canids/models/classifier.hpp"
#include "canids/traffic_synth.hpp"

namespace canids {

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct AttackGrid {
  std::vector<AttackMethod> methods{kAllAttackMethods.begin(), kAllAttackMethods.end()};
  std::vector<int> epsilons{1, 5};
  int steps = 10;
  std::optional<double> bim_step_size;  // default eps / steps
  std::optional<double> pgd_step_size;  // default eps / 4
  bool random_init = true;
};

struct ExperimentConfig {
  std::uint64_t seed = 7;
  std::string source = "synthetic";  // "synthetic" | "road"
  std::string road_manifest;         // path, when source == "road"
  SyntheticCorpusConfig synthetic;
  double train_fraction = 0.7;
  std::uint64_t split_seed = 7;
  std::vector<ModelKind> models{kAllModelKinds.begin(), kAllModelKinds.end()};
  Hyperparams hyperparams;
  AttackGrid attacks;
  std::vector<std::string> formats{"csv", "markdown"};

  void validate() const {
    if (source != "synthetic" && source != "road")
      throw Error(ErrorCode::InvalidConfig, "data.source must be 'synthetic' or 'road'");
    if (source == "road" && !std::filesystem::exists(road_manifest))
      throw Error(ErrorCode::InvalidConfig, "ROAD manifest not found: '" + road_manifest + "'");
    if (!(train_fraction > 0.0 && train_fraction < 1.0))
      throw Error(ErrorCode::InvalidConfig, "split.fraction must be in (0, 1)");
    if (models.empty()) throw Error(ErrorCode::InvalidConfig, "model list is empty");
    if (std::find(models.begin(), models.end(), ModelKind::Mlp) == models.end())
      throw Error(ErrorCode::InvalidConfig, "the mlp model is required as the attack surrogate");
    if (attacks.methods.empty() || attacks.epsilons.empty())
      throw Error(ErrorCode::InvalidConfig, "attack grid is empty");
    for (int e : attacks.epsilons)
      if (e < 0) throw Error(ErrorCode::InvalidConfig, "epsilon must be >= 0");
    if (attacks.steps < 1) throw Error(ErrorCode::InvalidConfig, "attacks.steps must be >= 1");
    for (const auto& f : formats)
      if (f != "csv" && f != "markdown") throw Error(ErrorCode::InvalidConfig, "unknown report format '" + f + "'");
  }

  AttackConfig attack_config(AttackMethod method, int eps, std::uint64_t stream) const {
    AttackConfig c;
    c.method = method;
    c.epsilon = eps;
    c.steps = attacks.steps;
    c.random_init = attacks.random_init;
    c.seed = derive_seed(seed, stream);
    if (method == AttackMethod::BIM) c.step_size = attacks.bim_step_size;
    if (method == AttackMethod::PGD) c.step_size = attacks.pgd_step_size;
    if (!c.step_size) c.step_size = c.resolved_step_size();
    return c;
  }
};

namespace detail {

template <typename T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

inline nlohmann::json tree_options_json(const TreeOptions& t) {
  return {{"max_depth", t.max_depth},
          {"min_samples_split", t.min_samples_split},
          {"features_per_split", t.features_per_split},
          {"split_rule", t.rule == SplitRule::Best ? "best" : "random"}};
}

inline void read_tree_options(const nlohmann::json& j, TreeOptions& t) {
  read_opt(j, "max_depth", t.max_depth);
  read_opt(j, "min_samples_split", t.min_samples_split);
  read_opt(j, "features_per_split", t.features_per_split);
  if (j.contains("split_rule")) {
    const auto rule = j.at("split_rule").get<std::string>();
    if (rule != "best" && rule != "random") throw Error(ErrorCode::InvalidConfig, "split_rule must be best|random");
    t.rule = rule == "best" ? SplitRule::Best : SplitRule::Random;
  }
  if (t.features_per_split < 1 || t.features_per_split > kNumFeatures)
    throw Error(ErrorCode::InvalidConfig, "features_per_split must be in 1..8");
}

inline nlohmann::json forest_options_json(const ForestOptions& f) {
  auto j = tree_options_json(f.tree);
  j["n_trees"] = f.n_trees;
  j["bootstrap"] = f.bootstrap;
  return j;
}

inline void read_forest_options(const nlohmann::json& j, ForestOptions& f) {
  read_tree_options(j, f.tree);
  read_opt(j, "n_trees", f.n_trees);
  read_opt(j, "bootstrap", f.bootstrap);
  if (f.n_trees < 1) throw Error(ErrorCode::InvalidConfig, "n_trees must be >= 1");
}

inline nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

inline nlohmann::json window_json(const TimeWindow& w) { return nlohmann::json::array({w.start, w.end}); }

inline void read_window(const nlohmann::json& j, const char* key, TimeWindow& w) {
  if (!j.contains(key)) return;
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 2) throw Error(ErrorCode::InvalidConfig, std::string(key) + " must be [start, end]");
  w = {a[0].get<double>(), a[1].get<double>()};
}

}  // namespace detail

/// Every setting, defaults included, as it is echoed into reports.
inline nlohmann::json config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["seed"] = c.seed;
  j["data"]["source"] = c.source;
  j["data"]["road_manifest"] = c.road_manifest;
  j["data"]["synthetic"] = {{"duration", c.synthetic.duration},
                            {"fuzz_rate", c.synthetic.fuzz_rate},
                            {"fuzz_window", detail::window_json(c.synthetic.fuzz_window)},
                            {"fabrication_period", c.synthetic.fabrication_period},
                            {"fabrication_window", detail::window_json(c.synthetic.fabrication_window)},
                            {"jitter", c.synthetic.ambient.jitter}};
  j["split"] = {{"fraction", c.train_fraction}, {"seed", c.split_seed}};
  auto models = nlohmann::json::array();
  for (auto m : c.models) models.push_back(std::string(to_string(m)));
  j["models"] = models;
  const auto& hp = c.hyperparams;
  j["hyperparams"]["threshold"] = hp.threshold;
  j["hyperparams"]["dt"] = detail::tree_options_json(hp.dt);
  j["hyperparams"]["rf"] = detail::forest_options_json(hp.rf);
  j["hyperparams"]["et"] = detail::forest_options_json(hp.et);
  j["hyperparams"]["gbt"] = {{"n_trees", hp.gbt.n_trees},
                             {"max_depth", hp.gbt.max_depth},
                             {"learning_rate", hp.gbt.learning_rate},
                             {"l2", hp.gbt.l2},
                             {"min_child_weight", hp.gbt.min_child_weight}};
  j["hyperparams"]["mlp"] = {{"epochs", hp.mlp.epochs},
                             {"batch_size", hp.mlp.batch_size},
                             {"learning_rate", hp.mlp.learning_rate},
                             {"beta1", hp.mlp.beta1},
                             {"beta2", hp.mlp.beta2},
                             {"adam_epsilon", hp.mlp.adam_epsilon}};
  auto methods = nlohmann::json::array();
  for (auto m : c.attacks.methods) methods.push_back(std::string(to_string(m)));
  j["attacks"] = {{"methods", methods},
                  {"epsilons", c.attacks.epsilons},
                  {"steps", c.attacks.steps},
                  {"bim_step_size", detail::optional_json(c.attacks.bim_step_size)},
                  {"pgd_step_size", detail::optional_json(c.attacks.pgd_step_size)},
                  {"bim_step_size_default", "epsilon / steps"},
                  {"pgd_step_size_default", "epsilon / 4"},
                  {"random_init", c.attacks.random_init},
                  {"rounding", "half-up, once after the final iterate"}};
  j["output"]["formats"] = c.formats;
  return j;
}

/// Missing keys keep their defaults. Unknown model or method names are rejected.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  ExperimentConfig c;
  try {
    detail::read_opt(j, "seed", c.seed);
    c.split_seed = c.seed;
    if (j.contains("data")) {
      const auto& d = j.at("data");
      detail::read_opt(d, "source", c.source);
      detail::read_opt(d, "road_manifest", c.road_manifest);
      if (d.contains("synthetic")) {
        const auto& s = d.at("synthetic");
        detail::read_opt(s, "duration", c.synthetic.duration);
        detail::read_opt(s, "fuzz_rate", c.synthetic.fuzz_rate);
        detail::read_window(s, "fuzz_window", c.synthetic.fuzz_window);
        detail::read_opt(s, "fabrication_period", c.synthetic.fabrication_period);
        detail::read_window(s, "fabrication_window", c.synthetic.fabrication_window);
        detail::read_opt(s, "jitter", c.synthetic.ambient.jitter);
      }
    }
    if (j.contains("split")) {
      detail::read_opt(j.at("split"), "fraction", c.train_fraction);
      detail::read_opt(j.at("split"), "seed", c.split_seed);
    }
    if (j.contains("models")) {
      c.models.clear();
      for (const auto& m : j.at("models")) {
        auto kind = parse_model_kind(m.get<std::string>());
        if (!kind) throw Error(ErrorCode::InvalidConfig, "unknown model '" + m.get<std::string>() + "'");
        c.models.push_back(*kind);
      }
    }
    if (j.contains("hyperparams")) {
      const auto& h = j.at("hyperparams");
      auto& hp = c.hyperparams;
      detail::read_opt(h, "threshold", hp.threshold);
      if (h.contains("dt")) detail::read_tree_options(h.at("dt"), hp.dt);
      if (h.contains("rf")) detail::read_forest_options(h.at("rf"), hp.rf);
      if (h.contains("et")) detail::read_forest_options(h.at("et"), hp.et);
      if (h.contains("gbt")) {
        const auto& g = h.at("gbt");
        detail::read_opt(g, "n_trees", hp.gbt.n_trees);
        detail::read_opt(g, "max_depth", hp.gbt.max_depth);
        detail::read_opt(g, "learning_rate", hp.gbt.learning_rate);
        detail::read_opt(g, "l2", hp.gbt.l2);
        detail::read_opt(g, "min_child_weight", hp.gbt.min_child_weight);
      }
      if (h.contains("mlp")) {
        const auto& m = h.at("mlp");
        detail::read_opt(m, "epochs", hp.mlp.epochs);
        detail::read_opt(m, "batch_size", hp.mlp.batch_size);
        detail::read_opt(m, "learning_rate", hp.mlp.learning_rate);
        detail::read_opt(m, "beta1", hp.mlp.beta1);
        detail::read_opt(m, "beta2", hp.mlp.beta2);
        detail::read_opt(m, "adam_epsilon", hp.mlp.adam_epsilon);
      }
    }
    if (j.contains("attacks")) {
      const auto& a = j.at("attacks");
      if (a.contains("methods")) {
        c.attacks.methods.clear();
        for (const auto& m : a.at("methods")) {
          auto method = parse_attack_method(m.get<std::string>());
          if (!method) throw Error(ErrorCode::InvalidConfig, "unknown attack '" + m.get<std::string>() + "'");
          c.attacks.methods.push_back(*method);
        }
      }
      detail::read_opt(a, "epsilons", c.attacks.epsilons);
      detail::read_opt(a, "steps", c.attacks.steps);
      if (a.contains("bim_step_size") && !a.at("bim_step_size").is_null())
        c.attacks.bim_step_size = a.at("bim_step_size").get<double>();
      if (a.contains("pgd_step_size") && !a.at("pgd_step_size").is_null())
        c.attacks.pgd_step_size = a.at("pgd_step_size").get<double>();
      detail::read_opt(a, "random_init", c.attacks.random_init);
    }
    if (j.contains("output")) detail::read_opt(j.at("output"), "formats", c.formats);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("config: ") + e.what());
  }
  return config_from_json(j);
}

// ---------------------------------------------------------------------------
// Data ingestion
// ---------------------------------------------------------------------------

/// Translate one capture entry of ROAD-style metadata
/// ({"injection_id": "0x0D0" | "XXX", "injection_data_str": "XXXXFFFF...",
///   "injection_interval": [start, end]}) into an attack spec.
inline AttackSpec attack_spec_from_road_metadata(const nlohmann::json& entry, Subset subset) {
  AttackSpec spec{subset, {}};
  try {
    AttackEntry e;
    std::string id = entry.at("injection_id").get<std::string>();
    if (id.starts_with("0x") || id.starts_with("0X")) id = id.substr(2);
    if (id != "XXX" && id != "xxx") e.can_id = detail::parse_can_id(id, id);
    e.pattern = PayloadPattern::parse(entry.value("injection_data_str", std::string(16, 'X')));
    const auto& iv = entry.at("injection_interval");
    e.windows.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
    spec.entries.push_back(std::move(e));
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::SchemaMismatch, std::string("ROAD metadata: ") + ex.what());
  }
  return spec;
}

/// One line per capture:
///   capture subset=MSA log=captures/max_speedometer_attack_1.log spec=specs/msa_1.spec relative_time=1
/// Paths are relative to the manifest. Without `spec` every frame is benign.
/// relative_time=1 shifts timestamps so the capture starts at 0 before labeling.
struct ManifestEntry {
  Subset subset = Subset::FA;
  std::filesystem::path log;
  std::optional<std::filesystem::path> spec;
  bool relative_time = false;
};

inline std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open manifest " + path);
  const auto base = std::filesystem::path(path).parent_path();
  std::vector<ManifestEntry> out;
  std::string line;
  while (std::getline(in, line)) {
    std::string_view text = line;
    if (auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    text = detail::trim(text);
    if (text.empty()) continue;
    if (!text.starts_with("capture ")) throw Error(ErrorCode::SchemaMismatch, "manifest: expected 'capture'");
    ManifestEntry e;
    bool have_subset = false, have_log = false;
    std::istringstream tokens{std::string(text.substr(8))};
    std::string token;
    while (tokens >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::SchemaMismatch, "manifest: bad token " + token);
      const std::string key = token.substr(0, eq), value = token.substr(eq + 1);
      if (key == "subset") {
        auto s = parse_subset(value);
        if (!s) throw Error(ErrorCode::SchemaMismatch, "manifest: unknown subset " + value);
        e.subset = *s;
        have_subset = true;
      } else if (key == "log") {
        e.log = base / value;
        have_log = true;
      } else if (key == "spec") {
        e.spec = base / value;
      } else if (key == "relative_time") {
        e.relative_time = value == "1" || value == "true";
      } else {
        throw Error(ErrorCode::SchemaMismatch, "manifest: unknown key " + key);
      }
    }
    if (!have_subset || !have_log) throw Error(ErrorCode::SchemaMismatch, "manifest: capture needs subset and log");
    out.push_back(std::move(e));
  }
  return out;
}

/// Labeled dataset of one capture, in capture order.
inline Dataset ingest_capture(std::vector<CanFrame> frames, const AttackSpec& spec, bool relative_time) {
  if (relative_time && !frames.empty()) {
    const double t0 = frames.front().timestamp;
    for (auto& f : frames) f.timestamp -= t0;
  }
  const auto records = label_frames(frames, spec);
  if (records.size() != frames.size()) throw Error(ErrorCode::InvalidArgument, "frame count not conserved");
  return make_dataset(records);
}

struct SubsetData {
  Subset subset;
  Dataset data;
};

inline std::vector<SubsetData> load_road(const std::string& manifest_path) {
  std::map<Subset, Dataset> by_subset;
  for (const auto& e : load_manifest(manifest_path)) {
    std::ifstream in(e.log);
    if (!in) throw Error(ErrorCode::IoFailure, "cannot open capture " + e.log.string());
    AttackSpec spec{e.subset, {}};
    if (e.spec) {
      spec = load_attack_spec(e.spec->string());
      spec.subset = e.subset;
    }
    auto ds = ingest_capture(parse_log(in), spec, e.relative_time);
    by_subset[e.subset] = merge_subsets({by_subset[e.subset], ds});
  }
  std::vector<SubsetData> out;
  for (Subset s : kAllSubsets)
    if (auto it = by_subset.find(s); it != by_subset.end()) out.push_back({s, std::move(it->second)});
  return out;
}

inline std::vector<SubsetData> load_synthetic(const SyntheticCorpusConfig& cfg, std::uint64_t seed) {
  std::vector<SubsetData> out;
  for (auto& sc : synthesize_corpus(cfg, seed))
    out.push_back({sc.subset, ingest_capture(std::move(sc.capture.frames), sc.spec, false)});
  return out;
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

struct BaselineRow {
  ModelKind model;
  ConfusionMatrix cm;
};

/// One (model, method, eps) cell of a subset table. Only raw counts are
/// stored; every ratio is derived from them at emission.
struct AdversarialRow {
  ModelKind model;
  AttackMethod method;
  int epsilon = 0;
  ConfusionMatrix benign_adv;     // perturbed benign slice
  ConfusionMatrix malicious_adv;  // perturbed malicious slice
  ConfusionMatrix benign_clean;
  ConfusionMatrix malicious_clean;
  std::size_t benign_discarded = 0;
  std::size_t malicious_discarded = 0;

  /// Subset test set with both perturbed slices substituted.
  ConfusionMatrix recombined() const noexcept { return benign_adv + malicious_adv; }
};

struct SubsetReport {
  Subset subset;
  std::size_t total_benign = 0;  // whole subset before the split
  std::size_t total_malicious = 0;
  std::size_t test_benign = 0;
  std::size_t test_malicious = 0;
  std::vector<BaselineRow> baseline;
  std::vector<AdversarialRow> rows;
};

struct EvaluationReport {
  nlohmann::json config;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::size_t test_benign = 0;
  std::size_t test_malicious = 0;
  std::vector<BaselineRow> overall;
  std::vector<SubsetReport> subsets;
};

/// MCC of a matrix unless it has no positives in truth, where F1 stands in.
struct ScoreCell {
  std::string_view name;
  double value = 0.0;
};

inline ScoreCell subset_score(const ConfusionMatrix& cm) {
  if (cm.tp + cm.fn == 0) return {"F1", f1(cm)};
  return {"MCC", mcc(cm)};
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

/// Stage-tagged failure: "stage <name>: <cause>".
inline Error stage_error(std::string_view stage, const Error& e) {
  return Error(stage, e);
}

template <typename Fn>
auto run_stage(std::string_view stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    throw stage_error(stage, e);
  }
}

struct TrainedModels {
  std::vector<ClassifierModel> models;

  const ClassifierModel& surrogate() const {
    for (const auto& m : models)
      if (m.kind() == ModelKind::Mlp) return m;
    throw Error(ErrorCode::InvalidConfig, "no mlp surrogate trained");
  }
};

/// Data stage of the workflow: ingest or synthesize, label, merge, split.
struct PreparedData {
  std::vector<SubsetData> subsets;
  Dataset merged;
  Dataset train;
  Dataset test;
};

inline PreparedData prepare_data(const ExperimentConfig& config) {
  PreparedData p;
  p.subsets = run_stage("ingest", [&] {
    return config.source == "road" ? load_road(config.road_manifest) : load_synthetic(config.synthetic, config.seed);
  });
  p.merged = run_stage("merge", [&] {
    std::vector<Dataset> parts;
    for (const auto& s : p.subsets) parts.push_back(s.data);
    return merge_subsets(parts);
  });
  std::tie(p.train, p.test) = run_stage("split", [&] { return split(p.merged, config.train_fraction, config.split_seed); });
  return p;
}

inline TrainedModels train_models(const ExperimentConfig& config, const Dataset& train_set) {
  TrainedModels out;
  for (std::size_t i = 0; i < config.models.size(); ++i) {
    const ModelKind kind = config.models[i];
    out.models.push_back(run_stage("train " + std::string(to_string(kind)), [&] {
      return train(kind, train_set, config.hyperparams, derive_seed(config.seed, 1000 + static_cast<std::uint64_t>(kind)));
    }));
  }
  return out;
}

/// The full workflow: data -> training -> clean baselines -> per-subset
/// crafting on the MLP surrogate -> transfer evaluation of every model.
inline EvaluationReport run_pipeline(const ExperimentConfig& config) {
  run_stage("config", [&] { config.validate(); });
  EvaluationReport report;
  report.config = config_to_json(config);

  const PreparedData data = prepare_data(config);
  report.train_size = data.train.size();
  report.test_size = data.test.size();
  report.test_benign = data.test.benign_count();
  report.test_malicious = data.test.malicious_count();

  const TrainedModels trained = train_models(config, data.train);
  run_stage("baseline", [&] {
    for (const auto& m : trained.models) report.overall.push_back({m.kind(), evaluate(m, data.test)});
  });

  const Mlp& surrogate = trained.surrogate().mlp();
  for (const auto& sd : data.subsets) {
    const std::string stage = "attack " + std::string(to_string(sd.subset));
    run_stage(stage, [&] {
      SubsetReport sr;
      sr.subset = sd.subset;
      sr.total_benign = sd.data.benign_count();
      sr.total_malicious = sd.data.malicious_count();
      const Dataset test = data.test.with_subset(sd.subset);
      const Dataset benign = test.with_label(0);
      const Dataset malicious = test.with_label(1);
      sr.test_benign = benign.size();
      sr.test_malicious = malicious.size();

      std::vector<ConfusionMatrix> benign_clean, malicious_clean;
      for (const auto& m : trained.models) {
        ConfusionMatrix cb = benign.empty() ? ConfusionMatrix{} : evaluate(m, benign);
        ConfusionMatrix cmal = malicious.empty() ? ConfusionMatrix{} : evaluate(m, malicious);
        benign_clean.push_back(cb);
        malicious_clean.push_back(cmal);
        sr.baseline.push_back({m.kind(), cb + cmal});
      }

      for (AttackMethod method : config.attacks.methods) {
        for (int eps : config.attacks.epsilons) {
          const std::uint64_t stream = 10000 + 100 * static_cast<std::uint64_t>(sd.subset) +
                                       10 * static_cast<std::uint64_t>(method);
          const AttackConfig ac_benign = config.attack_config(method, eps, stream * 1000 + 2 * eps);
          const AttackConfig ac_malicious = config.attack_config(method, eps, stream * 1000 + 2 * eps + 1);
          std::optional<AdversarialBatch> adv_b, adv_m;
          if (!benign.empty()) adv_b = craft_transfer_set(surrogate, benign, ac_benign);
          if (!malicious.empty()) adv_m = craft_transfer_set(surrogate, malicious, ac_malicious);
          const Dataset adv_benign = adv_b ? adv_b->compliant_dataset() : Dataset{};
          const Dataset adv_malicious = adv_m ? adv_m->compliant_dataset() : Dataset{};

          for (std::size_t k = 0; k < trained.models.size(); ++k) {
            const auto& model = trained.models[k];
            AdversarialRow row;
            row.model = model.kind();
            row.method = method;
            row.epsilon = eps;
            row.benign_clean = benign_clean[k];
            row.malicious_clean = malicious_clean[k];
            if (!adv_benign.empty()) row.benign_adv = evaluate(model, adv_benign);
            if (!adv_malicious.empty()) row.malicious_adv = evaluate(model, adv_malicious);
            row.benign_discarded = adv_b ? adv_b->discarded() : 0;
            row.malicious_discarded = adv_m ? adv_m->discarded() : 0;
            sr.rows.push_back(row);
          }
        }
      }
      report.subsets.push_back(std::move(sr));
    });
  }
  return report;
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

inline std::string format_ratio(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

namespace detail {

inline nlohmann::json cm_json(const ConfusionMatrix& cm) {
  return {{"tp", cm.tp}, {"tn", cm.tn}, {"fp", cm.fp}, {"fn", cm.fn}};
}

inline ConfusionMatrix cm_from_json(const nlohmann::json& j) {
  return {j.at("tp").get<std::uint64_t>(), j.at("tn").get<std::uint64_t>(), j.at("fp").get<std::uint64_t>(),
          j.at("fn").get<std::uint64_t>()};
}

inline std::string ratio_or_na(const ConfusionMatrix& cm, double (*fn)(const ConfusionMatrix&)) {
  try {
    return format_ratio(fn(cm));
  } catch (const Error&) {
    return "n/a";
  }
}

}  // namespace detail

/// Lossless JSON form holding raw counts only.
inline nlohmann::json report_to_json(const EvaluationReport& r) {
  nlohmann::json j;
  j["format"] = "canids-report";
  j["version"] = 1;
  j["config"] = r.config;
  j["train_size"] = r.train_size;
  j["test_size"] = r.test_size;
  j["test_benign"] = r.test_benign;
  j["test_malicious"] = r.test_malicious;
  auto overall = nlohmann::json::array();
  for (const auto& b : r.overall) overall.push_back({{"model", to_string(b.model)}, {"cm", detail::cm_json(b.cm)}});
  j["overall"] = overall;
  auto subsets = nlohmann::json::array();
  for (const auto& s : r.subsets) {
    nlohmann::json sj;
    sj["subset"] = to_string(s.subset);
    sj["total_benign"] = s.total_benign;
    sj["total_malicious"] = s.total_malicious;
    sj["test_benign"] = s.test_benign;
    sj["test_malicious"] = s.test_malicious;
    sj["baseline"] = nlohmann::json::array();
    for (const auto& b : s.baseline)
      sj["baseline"].push_back({{"model", to_string(b.model)}, {"cm", detail::cm_json(b.cm)}});
    sj["rows"] = nlohmann::json::array();
    for (const auto& row : s.rows)
      sj["rows"].push_back({{"model", to_string(row.model)},
                            {"attack", to_string(row.method)},
                            {"epsilon", row.epsilon},
                            {"benign_adv", detail::cm_json(row.benign_adv)},
                            {"malicious_adv", detail::cm_json(row.malicious_adv)},
                            {"benign_clean", detail::cm_json(row.benign_clean)},
                            {"malicious_clean", detail::cm_json(row.malicious_clean)},
                            {"benign_discarded", row.benign_discarded},
                            {"malicious_discarded", row.malicious_discarded}});
    subsets.push_back(sj);
  }
  j["subsets"] = subsets;
  return j;
}

inline EvaluationReport report_from_json(const nlohmann::json& j) {
  EvaluationReport r;
  try {
    if (j.at("format") != "canids-report") throw Error(ErrorCode::SchemaMismatch, "not a canids report");
    auto kind = [](const nlohmann::json& v) {
      auto k = parse_model_kind(v.get<std::string>());
      if (!k) throw Error(ErrorCode::SchemaMismatch, "unknown model in report");
      return *k;
    };
    r.config = j.at("config");
    r.train_size = j.at("train_size");
    r.test_size = j.at("test_size");
    r.test_benign = j.at("test_benign");
    r.test_malicious = j.at("test_malicious");
    for (const auto& b : j.at("overall")) r.overall.push_back({kind(b.at("model")), detail::cm_from_json(b.at("cm"))});
    for (const auto& sj : j.at("subsets")) {
      SubsetReport s;
      auto subset = parse_subset(sj.at("subset").get<std::string>());
      if (!subset) throw Error(ErrorCode::SchemaMismatch, "unknown subset in report");
      s.subset = *subset;
      s.total_benign = sj.at("total_benign");
      s.total_malicious = sj.at("total_malicious");
      s.test_benign = sj.at("test_benign");
      s.test_malicious = sj.at("test_malicious");
      for (const auto& b : sj.at("baseline")) s.baseline.push_back({kind(b.at("model")), detail::cm_from_json(b.at("cm"))});
      for (const auto& rj : sj.at("rows")) {
        AdversarialRow row;
        row.model = kind(rj.at("model"));
        auto method = parse_attack_method(rj.at("attack").get<std::string>());
        if (!method) throw Error(ErrorCode::SchemaMismatch, "unknown attack in report");
        row.method = *method;
        row.epsilon = rj.at("epsilon");
        row.benign_adv = detail::cm_from_json(rj.at("benign_adv"));
        row.malicious_adv = detail::cm_from_json(rj.at("malicious_adv"));
        row.benign_clean = detail::cm_from_json(rj.at("benign_clean"));
        row.malicious_clean = detail::cm_from_json(rj.at("malicious_clean"));
        row.benign_discarded = rj.at("benign_discarded");
        row.malicious_discarded = rj.at("malicious_discarded");
        s.rows.push_back(row);
      }
      r.subsets.push_back(std::move(s));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, std::string("report: ") + e.what());
  }
  return r;
}

inline constexpr std::string_view kReportCsvHeader =
    "subset,model,attack,eps,base_tp,base_tn,base_fp,base_fn,base_metric,base_value,"
    "adv_tn,adv_fp,asr_fp,adv_tp,adv_fn,asr_fn,comb_tp,comb_tn,comb_fp,comb_fn,metric,value,"
    "mcc_benign_substituted,mcc_malicious_substituted,benign_discarded,malicious_discarded,note";

/// Flat CSV: one `none` row per (subset, model) baseline, plus one row per
/// adversarial cell. Subset "ALL" holds the full-test-set baselines. `comb_*`
/// is the subset test set with both perturbed slices substituted and
/// `metric`/`value` are computed from it.
inline std::string render_csv(const EvaluationReport& r) {
  std::ostringstream out;
  out << kReportCsvHeader << "\n";
  auto cm_cols = [](const ConfusionMatrix& cm) {
    return std::to_string(cm.tp) + "," + std::to_string(cm.tn) + "," + std::to_string(cm.fp) + "," +
           std::to_string(cm.fn);
  };
  for (const auto& b : r.overall) {
    const auto s = subset_score(b.cm);
    out << "ALL," << display_name(b.model) << ",none,0," << cm_cols(b.cm) << "," << s.name << ","
        << format_ratio(s.value) << ",,,,,,,,,,,,,,,,,\n";
  }
  for (const auto& sr : r.subsets) {
    for (const auto& b : sr.baseline) {
      const auto s = subset_score(b.cm);
      out << to_string(sr.subset) << "," << display_name(b.model) << ",none,0," << cm_cols(b.cm) << "," << s.name
          << "," << format_ratio(s.value) << ",,,,,,,,,,,,,,,,,"
          << (sr.test_malicious == 0 ? "no malicious test samples" : "") << "\n";
    }
    for (const auto& row : sr.rows) {
      ConfusionMatrix base;
      for (const auto& b : sr.baseline)
        if (b.model == row.model) base = b.cm;
      const auto bs = subset_score(base);
      const ConfusionMatrix comb = row.recombined();
      const ScoreCell cs = comb.total() ? subset_score(comb) : ScoreCell{"MCC", 0.0};
      const ConfusionMatrix fp_sub = row.benign_adv + row.malicious_clean;
      const ConfusionMatrix fn_sub = row.benign_clean + row.malicious_adv;
      out << to_string(sr.subset) << "," << display_name(row.model) << "," << to_string(row.method) << ","
          << row.epsilon << "," << cm_cols(base) << "," << bs.name << "," << format_ratio(bs.value) << ","
          << row.benign_adv.tn << "," << row.benign_adv.fp << "," << detail::ratio_or_na(row.benign_adv, asr_fp) << ","
          << row.malicious_adv.tp << "," << row.malicious_adv.fn << ","
          << detail::ratio_or_na(row.malicious_adv, asr_fn) << "," << cm_cols(comb) << "," << cs.name << ","
          << format_ratio(cs.value) << "," << detail::ratio_or_na(fp_sub, mcc) << ","
          << detail::ratio_or_na(fn_sub, mcc) << "," << row.benign_discarded << "," << row.malicious_discarded << ","
          << (sr.test_malicious == 0 ? "no FN results (malicious slice empty); F1 reported" : "") << "\n";
    }
  }
  return out.str();
}

/// Markdown tables: corpus breakdown, clean baselines, then one
/// comparative table per subset.
inline std::string render_markdown(const EvaluationReport& r) {
  std::ostringstream out;
  out << "# CAN IDS adversarial robustness report\n\n";
  out << "## Corpus\n\n| Subset | Benign | Malicious | Total |\n|---|---:|---:|---:|\n";
  std::size_t tb = 0, tm = 0;
  for (const auto& s : r.subsets) {
    out << "| " << to_string(s.subset) << " | " << s.total_benign << " | " << s.total_malicious << " | "
        << s.total_benign + s.total_malicious << " |\n";
    tb += s.total_benign;
    tm += s.total_malicious;
  }
  out << "| **Total** | " << tb << " | " << tm << " | " << tb + tm << " |\n\n";
  out << "Train samples: " << r.train_size << ", test samples: " << r.test_size << " (" << r.test_benign
      << " benign, " << r.test_malicious << " malicious)\n\n";

  out << "## Clean test set\n\n| Model | Benign | Malicious | FP | FN | MCC |\n|---|---:|---:|---:|---:|---:|\n";
  for (const auto& b : r.overall) {
    out << "| " << display_name(b.model) << " | " << b.cm.tn + b.cm.fp << " | " << b.cm.tp + b.cm.fn << " | "
        << b.cm.fp << " | " << b.cm.fn << " | " << format_ratio(mcc(b.cm)) << " |\n";
  }
  out << "\n";

  for (const auto& sr : r.subsets) {
    const bool no_malicious = sr.test_malicious == 0;
    const std::string metric = no_malicious ? "F1" : "MCC";
    out << "## Comparative analysis: " << to_string(sr.subset) << "\n\n";
    out << "Test slice: " << sr.test_benign << " benign, " << sr.test_malicious << " malicious.\n\n";
    out << "| Model | FP | FN | " << metric << " | Attack | eps | adv FP | ASR_FP | adv FN | ASR_FN | adv " << metric
        << " |\n|---|---:|---:|---:|---|---:|---:|---:|---:|---:|---:|\n";
    for (const auto& row : sr.rows) {
      ConfusionMatrix base;
      for (const auto& b : sr.baseline)
        if (b.model == row.model) base = b.cm;
      const ConfusionMatrix comb = row.recombined();
      const double base_score = no_malicious ? f1(base) : mcc(base);
      const double adv_score = comb.total() == 0 ? 0.0 : (no_malicious ? f1(comb) : mcc(comb));
      out << "| " << display_name(row.model) << " | " << base.fp << " | " << base.fn << " | "
          << format_ratio(base_score) << " | " << to_string(row.method) << " | " << row.epsilon << " | "
          << row.benign_adv.fp << " | " << detail::ratio_or_na(row.benign_adv, asr_fp) << " | "
          << row.malicious_adv.fn << " | " << detail::ratio_or_na(row.malicious_adv, asr_fn) << " | "
          << format_ratio(adv_score) << " |\n";
    }
    std::size_t discarded = 0;
    for (const auto& row : sr.rows) discarded += row.benign_discarded + row.malicious_discarded;
    out << "\n";
    if (no_malicious)
      out << "Note: no FN results for " << to_string(sr.subset)
          << ": the malicious test slice is empty, so F1 is reported instead of MCC.\n\n";
    out << "adv " << metric << " is computed on the subset test slice with both perturbed slices substituted for "
           "their clean counterparts; report.csv also lists the single-substitution MCCs.\n\n";
    out << "Discarded adversarial samples (all rows): " << discarded << "\n\n";
  }

  out << "## Configuration\n\n```json\n" << r.config.dump(2) << "\n```\n";
  return out.str();
}

/// Writes report.json plus report.csv / report.md as configured; returns the paths.
inline std::vector<std::string> emit_report(const EvaluationReport& report, const std::vector<std::string>& formats,
                                            const std::string& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot create " + out_dir + ": " + ec.message());
  std::vector<std::string> written;
  auto write = [&](const std::string& name, const std::string& text) {
    const auto path = (std::filesystem::path(out_dir) / name).string();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::IoFailure, "cannot write " + path);
    f << text;
    if (!f) throw Error(ErrorCode::IoFailure, "write failed: " + path);
    written.push_back(path);
  };
  write("report.json", report_to_json(report).dump(2) + "\n");
  for (const auto& fmt : formats) {
    if (fmt == "csv") write("report.csv", render_csv(report));
    else if (fmt == "markdown") write("report.md", render_markdown(report));
    else throw Error(ErrorCode::InvalidConfig, "unknown report format '" + fmt + "'");
  }
  return written;
}

}  // namespace canids
