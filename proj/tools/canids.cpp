// Command-line front end for the CAN IDS robustness toolkit.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "canids/canids.hpp"

namespace fs = std::filesystem;
using namespace canids;

namespace {

ExperimentConfig config_or_default(const std::string& path) {
  return path.empty() ? ExperimentConfig{} : load_config(path);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path.string());
  out << text;
}

void print_matrix(const ConfusionMatrix& cm) {
  std::cout << "tp=" << cm.tp << " tn=" << cm.tn << " fp=" << cm.fp << " fn=" << cm.fn << "\n";
  std::cout << "mcc=" << format_ratio(mcc(cm)) << " f1=" << format_ratio(f1(cm));
  if (cm.tn + cm.fp) std::cout << " asr_fp=" << format_ratio(asr_fp(cm));
  if (cm.tp + cm.fn) std::cout << " asr_fn=" << format_ratio(asr_fn(cm));
  std::cout << "\n";
}

int cmd_synth(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out_dir) {
  ExperimentConfig cfg = config_or_default(config_path);
  if (seed) cfg.seed = *seed;
  fs::create_directories(out_dir);
  std::string manifest = "# canids capture manifest v1\n";
  for (const auto& sc : synthesize_corpus(cfg.synthetic, cfg.seed)) {
    const std::string name(to_string(sc.subset));
    std::string candump, csv = std::string(kCanonicalCsvHeader) + "\n";
    for (const auto& f : sc.capture.frames) {
      candump += to_candump(f) + "\n";
      csv += to_canonical_csv(f) + "\n";
    }
    write_text(fs::path(out_dir) / (name + ".log"), candump);
    write_text(fs::path(out_dir) / (name + ".csv"), csv);
    save_attack_spec(sc.spec, (fs::path(out_dir) / (name + ".spec")).string());
    manifest += "capture subset=" + name + " log=" + name + ".log spec=" + name + ".spec\n";
    std::cout << name << ": " << sc.capture.frames.size() << " frames, " << sc.injected.size() << " injected\n";
  }
  write_text(fs::path(out_dir) / "manifest.txt", manifest);
  return 0;
}

int cmd_prep(const std::string& manifest, const std::string& out_dir, double fraction, std::uint64_t seed) {
  const auto subsets = run_stage("ingest", [&] { return load_road(manifest); });
  std::vector<Dataset> parts;
  std::cout << "subset,benign,malicious,total\n";
  for (const auto& s : subsets) {
    std::cout << to_string(s.subset) << "," << s.data.benign_count() << "," << s.data.malicious_count() << ","
              << s.data.size() << "\n";
    parts.push_back(s.data);
  }
  const Dataset merged = merge_subsets(parts);
  std::cout << "Total," << merged.benign_count() << "," << merged.malicious_count() << "," << merged.size() << "\n";
  const auto [train_set, test_set] = run_stage("split", [&] { return split(merged, fraction, seed); });
  fs::create_directories(out_dir);
  save_csv(merged, (fs::path(out_dir) / "dataset.csv").string());
  save_csv(train_set, (fs::path(out_dir) / "train.csv").string());
  save_csv(test_set, (fs::path(out_dir) / "test.csv").string());
  save_csv(test_set.with_label(0), (fs::path(out_dir) / "test_benign.csv").string());
  save_csv(test_set.with_label(1), (fs::path(out_dir) / "test_malicious.csv").string());
  std::cout << "train=" << train_set.size() << " test=" << test_set.size() << " (" << test_set.benign_count()
            << " benign, " << test_set.malicious_count() << " malicious)\n";
  return 0;
}

int cmd_translate(const std::string& metadata, const std::string& capture, const std::string& subset_name,
                  const std::string& out) {
  const auto subset = parse_subset(subset_name);
  if (!subset) throw Error(ErrorCode::InvalidArgument, "unknown subset " + subset_name);
  std::ifstream in(metadata);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + metadata);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, e.what());
  }
  if (!j.contains(capture)) throw Error(ErrorCode::SchemaMismatch, "metadata has no entry '" + capture + "'");
  save_attack_spec(attack_spec_from_road_metadata(j.at(capture), *subset), out);
  return 0;
}

int cmd_train(const std::string& model_name, std::uint64_t seed, const std::string& in, const std::string& out,
              const std::string& config_path) {
  const auto kind = parse_model_kind(model_name);
  if (!kind) throw Error(ErrorCode::InvalidArgument, "unknown model " + model_name);
  const ExperimentConfig cfg = config_or_default(config_path);
  const Dataset ds = run_stage("load", [&] { return load_csv(in); });
  const auto model = run_stage("train", [&] { return train(*kind, ds, cfg.hyperparams, seed); });
  save_model(model, out);
  print_matrix(evaluate(model, ds));
  return 0;
}

int cmd_attack(const std::string& method_name, int eps, int steps, std::optional<double> step_size, bool no_init,
               std::uint64_t seed, const std::string& surrogate_path, const std::string& in, const std::string& out) {
  const auto method = parse_attack_method(method_name);
  if (!method) throw Error(ErrorCode::InvalidArgument, "unknown attack " + method_name);
  const auto surrogate = run_stage("load", [&] { return load_model(surrogate_path); });
  const Dataset slice = run_stage("load", [&] { return load_csv(in); });
  AttackConfig cfg;
  cfg.method = *method;
  cfg.epsilon = eps;
  cfg.steps = steps;
  cfg.step_size = step_size;
  cfg.random_init = !no_init;
  cfg.seed = seed;
  const auto batch = run_stage("attack", [&] { return craft_transfer_set(surrogate.mlp(), slice, cfg); });
  std::ofstream f(out);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot write " + out);
  write_adversarial_csv(batch, f);
  std::cout << "crafted " << batch.size() << " (" << batch.compliant() << " compliant, " << batch.discarded()
            << " discarded)\n";
  return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& in) {
  const auto model = run_stage("load", [&] { return load_model(model_path); });
  std::ifstream f(in);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot open " + in);
  std::string header;
  std::getline(f, header);
  f.seekg(0);
  Dataset ds;
  if (detail::trim(header) == kAdversarialCsvHeader) {
    ds = read_adversarial_csv(f).compliant_dataset();
  } else {
    ds = read_csv(f);
  }
  print_matrix(run_stage("evaluate", [&] { return evaluate(model, ds); }));
  return 0;
}

int cmd_report(const std::string& in, const std::string& format, const std::string& out) {
  std::ifstream f(in);
  if (!f) throw Error(ErrorCode::IoFailure, "cannot open " + in);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::SchemaMismatch, e.what());
  }
  const auto report = report_from_json(j);
  std::string text;
  if (format == "csv") text = render_csv(report);
  else if (format == "markdown") text = render_markdown(report);
  else throw Error(ErrorCode::InvalidArgument, "format must be csv or markdown");
  if (out.empty()) std::cout << text;
  else write_text(out, text);
  return 0;
}

int cmd_run_all(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out_dir) {
  ExperimentConfig cfg = config_or_default(config_path);
  if (seed) {
    cfg.seed = *seed;
    cfg.split_seed = *seed;
  }
  const auto report = run_pipeline(cfg);
  for (const auto& path : emit_report(report, cfg.formats, out_dir)) std::cout << "wrote " << path << "\n";
  return 0;
}

int cmd_gradcheck(const std::string& model_path, std::size_t n, double h, std::uint64_t seed) {
  const auto model = run_stage("load", [&] { return load_model(model_path); });
  const Mlp& net = model.mlp();
  Rng rng(seed);
  double worst = 0.0;
  std::size_t checked = 0, skipped = 0;
  while (checked < n) {
    Point x{};
    for (auto& v : x) v = rng.uniform(1.0, 254.0);
    const int y = static_cast<int>(rng.below(2));
    if (!kink_free(net, x, 2 * h)) {
      if (++skipped > 100 * n) break;
      continue;
    }
    worst = std::max(worst, finite_diff_check(net, x, y, h));
    ++checked;
  }
  std::cout << "checked=" << checked << " skipped_near_kink=" << skipped << " max_relative_error=" << worst << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CAN bus IDS adversarial robustness toolkit"};
  app.require_subcommand(1);

  std::string config, out, in, model, method, format, manifest, metadata, capture, subset, spec_out;
  std::uint64_t seed_value = 7;
  std::optional<std::uint64_t> seed;
  double fraction = 0.7, h = 1e-3;
  int eps = 1, steps = 10;
  std::optional<double> step_size;
  bool no_init = false;
  std::size_t n = 100;

  auto* synth = app.add_subcommand("synth", "Generate labeled synthetic captures");
  synth->add_option("--config", config, "Experiment config (JSON)");
  synth->add_option("--seed", seed, "Seed");
  synth->add_option("--out", out, "Output directory")->required();

  auto* prep = app.add_subcommand("prep", "Ingest captures, label, merge and split");
  auto* prep_manifest = prep->add_option("--manifest", manifest, "Capture manifest");
  prep->add_option("--out", out, "Output directory");
  prep->add_option("--fraction", fraction, "Train fraction")->check(CLI::Range(0.0, 1.0));
  prep->add_option("--seed", seed_value, "Split seed");
  auto* prep_meta = prep->add_option("--metadata", metadata, "ROAD metadata JSON to translate into an attack spec");
  prep->add_option("--capture", capture, "Capture name inside the metadata")->needs(prep_meta);
  prep->add_option("--subset", subset, "Subset tag for the translated spec")->needs(prep_meta);
  prep->add_option("--spec-out", spec_out, "Where to write the translated spec")->needs(prep_meta);
  prep_manifest->excludes(prep_meta);

  auto* trn = app.add_subcommand("train", "Train one IDS model");
  trn->add_option("--model", model, "dt, rf, et, gbt or mlp")->required()->check(CLI::IsMember({"dt", "rf", "et", "gbt", "mlp"}));
  trn->add_option("--seed", seed_value, "Seed");
  trn->add_option("--in", in, "Training dataset CSV")->required();
  trn->add_option("--out", out, "Model file")->required();
  trn->add_option("--config", config, "Experiment config for hyperparameters");

  auto* atk = app.add_subcommand("attack", "Craft adversarial samples on the MLP surrogate");
  atk->add_option("--method", method, "fgsm, bim or pgd")->required()->check(CLI::IsMember({"fgsm", "bim", "pgd"}));
  atk->add_option("--eps", eps, "Per-byte budget")->required()->check(CLI::NonNegativeNumber);
  atk->add_option("--steps", steps, "Iterations (bim/pgd)")->check(CLI::PositiveNumber);
  atk->add_option("--step-size", step_size, "Step in byte units");
  atk->add_flag("--no-random-init", no_init, "PGD without random start");
  atk->add_option("--seed", seed_value, "Seed for PGD starts");
  atk->add_option("--surrogate", model, "MLP model file")->required();
  atk->add_option("--in", in, "Single-class slice CSV")->required();
  atk->add_option("--out", out, "Adversarial CSV")->required();

  auto* evl = app.add_subcommand("evaluate", "Confusion matrix and metrics of a model on a dataset or adversarial CSV");
  evl->add_option("--model", model, "Model file")->required();
  evl->add_option("--in", in, "Dataset or adversarial CSV")->required();

  auto* rep = app.add_subcommand("report", "Render a report.json as csv or markdown");
  rep->add_option("--in", in, "report.json")->required();
  rep->add_option("--format", format, "csv or markdown")->required()->check(CLI::IsMember({"csv", "markdown"}));
  rep->add_option("--out", out, "Output file (stdout if omitted)");

  auto* all = app.add_subcommand("run-all", "Run the full workflow and emit reports");
  all->add_option("--config", config, "Experiment config (JSON)");
  all->add_option("--seed", seed, "Seed override");
  all->add_option("--out", out, "Output directory")->required();

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the MLP input gradient");
  grad->add_option("--model", model, "MLP model file")->required();
  grad->add_option("--n", n, "Number of random points");
  grad->add_option("--step", h, "Finite-difference step in byte units");
  grad->add_option("--seed", seed_value, "Seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return cmd_synth(config, seed, out);
    if (*prep) {
      if (!metadata.empty()) {
        if (capture.empty() || subset.empty() || spec_out.empty())
          throw Error(ErrorCode::InvalidArgument, "--metadata needs --capture, --subset and --spec-out");
        return cmd_translate(metadata, capture, subset, spec_out);
      }
      if (manifest.empty() || out.empty()) throw Error(ErrorCode::InvalidArgument, "prep needs --manifest and --out");
      return cmd_prep(manifest, out, fraction, seed_value);
    }
    if (*trn) return cmd_train(model, seed_value, in, out, config);
    if (*atk) return cmd_attack(method, eps, steps, step_size, no_init, seed_value, model, in, out);
    if (*evl) return cmd_evaluate(model, in);
    if (*rep) return cmd_report(in, format, out);
    if (*all) return cmd_run_all(config, seed, out);
    if (*grad) return cmd_gradcheck(model, n, h, seed_value);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 1;
}
