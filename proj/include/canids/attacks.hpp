#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "canids/dataset.hpp"
#include "canids/detail/parallel.hpp"
#include "canids/error.hpp"
#include "canids/frame_codec.hpp"
#include "canids/grad.hpp"
#include "canids/models/mlp.hpp"
#include "canids/rng.hpp"

namespace canids {

enum class AttackMethod : std::uint8_t { FGSM, BIM, PGD };

inline constexpr std::array<AttackMethod, 3> kAllAttackMethods = {AttackMethod::FGSM, AttackMethod::BIM,
                                                                  AttackMethod::PGD};

constexpr std::string_view to_string(AttackMethod m) noexcept {
  switch (m) {
    case AttackMethod::FGSM: return "FGSM";
    case AttackMethod::BIM: return "BIM";
    case AttackMethod::PGD: return "PGD";
  }
  return "?";
}

inline std::optional<AttackMethod> parse_attack_method(std::string_view text) noexcept {
  std::string upper(text);
  for (auto& c : upper) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  for (auto m : kAllAttackMethods)
    if (to_string(m) == upper) return m;
  return std::nullopt;
}

/// Crafting parameters. epsilon and step_size are in raw byte units.
struct AttackConfig {
  AttackMethod method = AttackMethod::FGSM;
  int epsilon = 1;
  int steps = 10;
  std::optional<double> step_size;  // unset: BIM eps/steps, PGD eps/4
  bool random_init = true;          // PGD only
  std::uint64_t seed = 0;

  double resolved_step_size() const noexcept {
    if (step_size) return *step_size;
    if (method == AttackMethod::PGD) return epsilon / 4.0;
    return static_cast<double>(epsilon) / std::max(steps, 1);
  }

  void validate() const {
    if (epsilon < 0) throw Error(ErrorCode::InvalidArgument, "epsilon must be >= 0");
    if (method != AttackMethod::FGSM) {
      if (steps < 1) throw Error(ErrorCode::InvalidArgument, "iterative attacks need steps >= 1");
      if (!(resolved_step_size() > 0.0) && epsilon > 0)
        throw Error(ErrorCode::InvalidArgument, "step size must be > 0");
    }
  }
};

enum class Verdict : std::uint8_t { Compliant, Discarded };

constexpr std::string_view to_string(Verdict v) noexcept {
  return v == Verdict::Compliant ? "compliant" : "discarded";
}

struct Projected {
  FeatureVector x{};
  Verdict verdict = Verdict::Compliant;
};

namespace detail {

inline double sign(double g) noexcept {
  if (g > 0.0) return 1.0;
  if (g < 0.0) return -1.0;
  return g == 0.0 ? 0.0 : std::numeric_limits<double>::quiet_NaN();
}

inline double lower_bound(std::uint8_t orig, int eps) noexcept { return std::max(0, int{orig} - eps); }
inline double upper_bound(std::uint8_t orig, int eps) noexcept { return std::min(255, int{orig} + eps); }

/// Clamp into the eps-ball around orig intersected with [0, 255].
inline Point clip_to_ball(const FeatureVector& orig, const Point& p, int eps) noexcept {
  Point out{};
  for (std::size_t i = 0; i < kNumFeatures; ++i)
    out[i] = std::clamp(p[i], lower_bound(orig[i], eps), upper_bound(orig[i], eps));
  return out;
}

/// One signed-gradient ascent step followed by the ball/range clip.
inline Point ascent_step(const Mlp& surrogate, const FeatureVector& orig, const Point& x, int y, double step,
                         int eps) {
  const InputGradient g = input_gradient(surrogate, x, y);
  Point next{};
  for (std::size_t i = 0; i < kNumFeatures; ++i) next[i] = x[i] + step * sign(g[i]);
  return clip_to_ball(orig, next, eps);
}

}  // namespace detail

/// Map a continuous iterate back to a valid payload: clamp each byte into
/// [orig - eps, orig + eps] and [0, 255], then round half up. Only the eight
/// payload bytes exist here, so id and DLC cannot change. The result is
/// audited; a non-finite iterate or a failed audit yields Discarded with
/// the original bytes.
inline Projected project_constraints(const FeatureVector& orig, const Point& perturbed, int eps) noexcept {
  Projected out{orig, Verdict::Compliant};
  if (eps < 0) {
    out.verdict = Verdict::Discarded;
    return out;
  }
  for (std::size_t i = 0; i < kNumFeatures; ++i) {
    if (!std::isfinite(perturbed[i])) {
      out = {orig, Verdict::Discarded};
      return out;
    }
    const double lo = detail::lower_bound(orig[i], eps), hi = detail::upper_bound(orig[i], eps);
    const double rounded = std::floor(std::clamp(perturbed[i], lo, hi) + 0.5);
    if (rounded < lo || rounded > hi || rounded < 0.0 || rounded > 255.0) {
      out = {orig, Verdict::Discarded};
      return out;
    }
    out.x[i] = static_cast<std::uint8_t>(rounded);
  }
  return out;
}

/// x + eps * sign(grad), projected.
inline Projected fgsm(const Mlp& surrogate, const FeatureVector& x, int y, int eps) {
  if (eps < 0) throw Error(ErrorCode::InvalidArgument, "epsilon must be >= 0");
  const Point p = to_point(x);
  const InputGradient g = input_gradient(surrogate, p, y);
  Point adv{};
  for (std::size_t i = 0; i < kNumFeatures; ++i) adv[i] = p[i] + eps * detail::sign(g[i]);
  return project_constraints(x, adv, eps);
}

/// `steps` signed-gradient steps of `step_size`, clipped to the ball and
/// byte range after every step; rounded once at the end.
inline Projected bim(const Mlp& surrogate, const FeatureVector& x, int y, const AttackConfig& config) {
  config.validate();
  const double step = config.resolved_step_size();
  Point it = to_point(x);
  for (int k = 0; k < config.steps; ++k) it = detail::ascent_step(surrogate, x, it, y, step, config.epsilon);
  return project_constraints(x, it, config.epsilon);
}

/// BIM from an optional uniform start in the eps-ball. The start draws from
/// stream derive_seed(config.seed, sample_index).
inline Projected pgd(const Mlp& surrogate, const FeatureVector& x, int y, const AttackConfig& config,
                     std::uint64_t sample_index = 0) {
  config.validate();
  const double step = config.resolved_step_size();
  Point it = to_point(x);
  if (config.random_init) {
    Rng rng(derive_seed(config.seed, sample_index));
    for (auto& v : it) v += rng.uniform(-config.epsilon, config.epsilon);
    it = detail::clip_to_ball(x, it, config.epsilon);
  }
  for (int k = 0; k < config.steps; ++k) it = detail::ascent_step(surrogate, x, it, y, step, config.epsilon);
  return project_constraints(x, it, config.epsilon);
}

inline Projected craft(const Mlp& surrogate, const FeatureVector& x, int y, const AttackConfig& config,
                       std::uint64_t sample_index = 0) {
  switch (config.method) {
    case AttackMethod::FGSM: return fgsm(surrogate, x, y, config.epsilon);
    case AttackMethod::BIM: return bim(surrogate, x, y, config);
    case AttackMethod::PGD: return pgd(surrogate, x, y, config, sample_index);
  }
  return {x, Verdict::Discarded};
}

/// Parallel lists: originals[i] was crafted into perturbed[i] with verdicts[i].
struct AdversarialBatch {
  std::vector<LabeledRecord> originals;
  std::vector<FeatureVector> perturbed;
  std::vector<Verdict> verdicts;
  AttackConfig config;

  std::size_t size() const noexcept { return originals.size(); }

  std::size_t discarded() const noexcept {
    return static_cast<std::size_t>(std::count(verdicts.begin(), verdicts.end(), Verdict::Discarded));
  }
  std::size_t compliant() const noexcept { return size() - discarded(); }

  /// Compliant perturbed samples with their original labels, ids and subsets.
  Dataset compliant_dataset() const {
    Dataset ds;
    ds.reserve(compliant());
    for (std::size_t i = 0; i < size(); ++i) {
      if (verdicts[i] != Verdict::Compliant) continue;
      LabeledRecord r = originals[i];
      r.features = perturbed[i];
      ds.add(r);
    }
    return ds;
  }
};

/// Craft every sample of a single-class slice on the surrogate, ascending the
/// loss of each sample's true label. Only the surrogate is visible here, so
/// victim models cannot influence the batch.
inline AdversarialBatch craft_transfer_set(const Mlp& surrogate, const Dataset& samples, const AttackConfig& config) {
  if (samples.empty()) throw Error(ErrorCode::EmptySlice, "no samples to attack");
  config.validate();
  AdversarialBatch batch;
  batch.config = config;
  batch.originals = samples.records();
  batch.perturbed.resize(samples.size());
  batch.verdicts.resize(samples.size());
  detail::parallel_for(samples.size(), [&](std::size_t i) {
    const auto& r = samples[i];
    const Projected p = craft(surrogate, r.features, r.label, config, i);
    batch.perturbed[i] = p.x;
    batch.verdicts[i] = p.verdict;
  });
  return batch;
}

// ---------------------------------------------------------------------------
// Adversarial CSV: subset,id,o0..o7,d0..d7,label,verdict
// ---------------------------------------------------------------------------

inline constexpr std::string_view kAdversarialCsvHeader =
    "subset,id,o0,o1,o2,o3,o4,o5,o6,o7,d0,d1,d2,d3,d4,d5,d6,d7,label,verdict";

inline void write_adversarial_csv(const AdversarialBatch& batch, std::ostream& out) {
  out << kAdversarialCsvHeader << "\n";
  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& r = batch.originals[i];
    out << to_string(r.subset) << "," << format_can_id(r.can_id);
    for (auto b : r.features) out << "," << static_cast<unsigned>(b);
    for (auto b : batch.perturbed[i]) out << "," << static_cast<unsigned>(b);
    out << "," << static_cast<unsigned>(r.label) << "," << to_string(batch.verdicts[i]) << "\n";
  }
}

inline AdversarialBatch read_adversarial_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != kAdversarialCsvHeader)
    throw Error(ErrorCode::SchemaMismatch, "missing adversarial header");
  AdversarialBatch batch;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = detail::trim(line);
    if (text.empty()) continue;
    auto fail = [&](const std::string& why) {
      throw Error(ErrorCode::SchemaMismatch, "line " + std::to_string(line_no) + ": " + why);
    };
    const auto f = detail::split_csv(text);
    if (f.size() != 20) fail("expected 20 fields");
    LabeledRecord r;
    const auto subset = parse_subset(f[0]);
    if (!subset) fail("unknown subset");
    r.subset = *subset;
    r.can_id = detail::parse_csv_id(f[1]);
    FeatureVector adv{};
    for (std::size_t b = 0; b < kNumFeatures; ++b) {
      unsigned o = 0, d = 0;
      if (!detail::parse_uint(f[2 + b], 255, o) || !detail::parse_uint(f[10 + b], 255, d)) fail("byte not in 0..255");
      r.features[b] = static_cast<std::uint8_t>(o);
      adv[b] = static_cast<std::uint8_t>(d);
    }
    unsigned label = 0;
    if (!detail::parse_uint(f[18], 1, label)) fail("label must be 0 or 1");
    r.label = static_cast<std::uint8_t>(label);
    Verdict v = Verdict::Compliant;
    if (f[19] == "compliant") v = Verdict::Compliant;
    else if (f[19] == "discarded") v = Verdict::Discarded;
    else fail("verdict must be compliant or discarded");
    batch.originals.push_back(r);
    batch.perturbed.push_back(adv);
    batch.verdicts.push_back(v);
  }
  return batch;
}

}  // namespace canids
