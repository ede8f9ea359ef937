#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "canids/dataset.hpp"
#include "canids/error.hpp"
#include "canids/frame_codec.hpp"
#include "canids/rng.hpp"

namespace canids {

/// Timestamps are kept on a microsecond grid so that candump text (six
/// decimals) round-trips them exactly.
inline double quantize_us(double t) noexcept { return std::round(t * 1e6) / 1e6; }

struct ByteGenerator {
  enum class Kind : std::uint8_t { Constant, Counter, NoisySensor };

  Kind kind = Kind::Constant;
  int value = 0;    // Constant: the byte. NoisySensor: the mean.
  int modulus = 1;  // Counter
  int spread = 0;   // NoisySensor: uniform integer offset in [-spread, spread]

  static ByteGenerator constant(int v) { return {Kind::Constant, v, 1, 0}; }
  static ByteGenerator counter(int modulus) { return {Kind::Counter, 0, modulus, 0}; }
  static ByteGenerator noisy_sensor(int mean, int spread) { return {Kind::NoisySensor, mean, 1, spread}; }
};

struct AmbientSignal {
  std::uint16_t can_id = 0;
  double period = 0.1;  // seconds
  std::array<ByteGenerator, kPayloadBytes> bytes{};
};

struct AmbientProfile {
  std::vector<AmbientSignal> signals;
  double jitter = 0.05;  // uniform timestamp jitter, as a fraction of the period
};

/// A capture is a timestamp-sorted frame list plus its nominal length.
struct Capture {
  std::vector<CanFrame> frames;
  double duration = 0.0;
};

struct FuzzingSpec {
  double rate = 100.0;  // frames per second
  TimeWindow window;
};

struct FabricationSpec {
  std::uint16_t target_id = 0;
  Payload payload{0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF};
  double period = 0.01;
  TimeWindow window;
};

struct InjectionResult {
  Capture capture;
  AttackSpec spec;
  /// Positions of the injected frames in capture.frames, ascending.
  std::vector<std::size_t> injected;
};

namespace detail {

inline void validate_profile(const AmbientProfile& profile) {
  if (profile.signals.empty()) throw Error(ErrorCode::EmptyProfile, "ambient profile has no signals");
  for (const auto& s : profile.signals) {
    if (s.can_id > kMaxStandardId) throw Error(ErrorCode::IdOutOfRange, "ambient id " + format_can_id(s.can_id));
    if (!(s.period > 0.0)) throw Error(ErrorCode::InvalidArgument, "ambient period must be > 0");
    for (const auto& g : s.bytes) {
      if (g.value < 0 || g.value > 255) throw Error(ErrorCode::InvalidArgument, "byte value outside 0..255");
      if (g.kind == ByteGenerator::Kind::Counter && (g.modulus < 1 || g.modulus > 256))
        throw Error(ErrorCode::InvalidArgument, "counter modulus must be in 1..256");
      if (g.spread < 0) throw Error(ErrorCode::InvalidArgument, "spread must be >= 0");
    }
  }
  if (profile.jitter < 0.0 || profile.jitter >= 0.5)
    throw Error(ErrorCode::InvalidArgument, "jitter must be in [0, 0.5)");
}

inline std::uint8_t draw_byte(const ByteGenerator& g, std::size_t frame_index, Rng& rng) noexcept {
  switch (g.kind) {
    case ByteGenerator::Kind::Constant: return static_cast<std::uint8_t>(g.value);
    case ByteGenerator::Kind::Counter:
      return static_cast<std::uint8_t>(frame_index % static_cast<std::size_t>(g.modulus));
    case ByteGenerator::Kind::NoisySensor: {
      const int offset = static_cast<int>(rng.below(static_cast<std::uint64_t>(2 * g.spread + 1))) - g.spread;
      return static_cast<std::uint8_t>(std::clamp(g.value + offset, 0, 255));
    }
  }
  return 0;
}

inline std::size_t event_count(double length, double period) noexcept {
  if (length <= 0.0) return 0;
  return static_cast<std::size_t>(std::floor(length / period + 1e-9));
}

inline void check_window(const TimeWindow& w, const Capture& capture) {
  if (!(w.start >= 0.0) || w.end < w.start || w.end > capture.duration)
    throw Error(ErrorCode::WindowOutOfRange, "window [" + format_timestamp(w.start) + ", " +
                                                 format_timestamp(w.end) + "] outside capture of " +
                                                 format_timestamp(capture.duration) + " s");
}

/// Stable merge of ambient and injected frames by timestamp; ambient first on ties.
inline InjectionResult merge_injected(const Capture& base, std::vector<CanFrame> injected, AttackSpec spec) {
  InjectionResult out;
  out.capture.duration = base.duration;
  out.capture.frames.reserve(base.frames.size() + injected.size());
  std::size_t i = 0, j = 0;
  while (i < base.frames.size() || j < injected.size()) {
    const bool take_base =
        j == injected.size() || (i < base.frames.size() && base.frames[i].timestamp <= injected[j].timestamp);
    if (take_base) {
      out.capture.frames.push_back(base.frames[i++]);
    } else {
      out.injected.push_back(out.capture.frames.size());
      out.capture.frames.push_back(injected[j++]);
    }
  }
  out.spec = std::move(spec);
  return out;
}

}  // namespace detail

/// Periodic background traffic. Each signal emits floor(duration / period)
/// frames at k * period plus uniform jitter of +-jitter * period, clamped
/// into [0, duration). Signal i draws from stream derive_seed(seed, i).
inline Capture gen_ambient(const AmbientProfile& profile, double duration, std::uint64_t seed) {
  detail::validate_profile(profile);
  if (!(duration > 0.0)) throw Error(ErrorCode::InvalidArgument, "duration must be > 0");

  Capture capture;
  capture.duration = duration;
  for (std::size_t s = 0; s < profile.signals.size(); ++s) {
    const auto& signal = profile.signals[s];
    Rng rng(derive_seed(seed, s));
    const std::size_t n = detail::event_count(duration, signal.period);
    for (std::size_t k = 0; k < n; ++k) {
      CanFrame f;
      const double jitter = profile.jitter * signal.period * rng.uniform(-1.0, 1.0);
      const double t = static_cast<double>(k) * signal.period + jitter;
      f.timestamp = quantize_us(std::clamp(t, 0.0, duration));
      if (f.timestamp >= duration) f.timestamp = quantize_us(duration - 1e-6);
      f.can_id = signal.can_id;
      f.dlc = kPayloadBytes;
      for (std::size_t b = 0; b < kPayloadBytes; ++b) f.payload[b] = detail::draw_byte(signal.bytes[b], k, rng);
      capture.frames.push_back(f);
    }
  }
  std::stable_sort(capture.frames.begin(), capture.frames.end(),
                   [](const CanFrame& a, const CanFrame& b) { return a.timestamp < b.timestamp; });
  return capture;
}

/// Flood of frames with uniform random 11-bit ids and uniform random bytes
/// at `rate` per second inside the window. The returned spec pins each
/// injected frame by id, exact payload and instant.
inline InjectionResult inject_fuzzing(const Capture& capture, const FuzzingSpec& spec, Subset subset,
                                      std::uint64_t seed) {
  if (!(spec.rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "fuzzing rate must be > 0");
  detail::check_window(spec.window, capture);

  Rng rng(seed);
  const std::size_t n = detail::event_count((spec.window.end - spec.window.start) * spec.rate, 1.0);
  std::vector<CanFrame> injected;
  injected.reserve(n);
  AttackSpec attack{subset, {}};
  for (std::size_t i = 0; i < n; ++i) {
    CanFrame f;
    f.timestamp = quantize_us(spec.window.start + static_cast<double>(i) / spec.rate);
    f.can_id = static_cast<std::uint16_t>(rng.below(kMaxStandardId + 1));
    f.dlc = kPayloadBytes;
    for (auto& b : f.payload) b = static_cast<std::uint8_t>(rng.below(256));
    attack.entries.push_back({f.can_id, PayloadPattern::exact(f.payload), {{f.timestamp, f.timestamp}}});
    injected.push_back(f);
  }
  return detail::merge_injected(capture, std::move(injected), std::move(attack));
}

/// Fixed payload on a legitimate id every `period` seconds inside the window.
/// `seed` is accepted for interface symmetry; fabrication draws nothing.
inline InjectionResult inject_fabrication(const Capture& capture, const FabricationSpec& spec, Subset subset,
                                          std::uint64_t /*seed*/ = 0) {
  if (!(spec.period > 0.0)) throw Error(ErrorCode::InvalidArgument, "fabrication period must be > 0");
  if (spec.target_id > kMaxStandardId) throw Error(ErrorCode::IdOutOfRange, "target id");
  detail::check_window(spec.window, capture);

  const std::size_t n = detail::event_count(spec.window.end - spec.window.start, spec.period);
  std::vector<CanFrame> injected;
  injected.reserve(n);
  for (std::size_t k = 0; k < n; ++k)
    injected.push_back({quantize_us(spec.window.start + static_cast<double>(k) * spec.period), spec.target_id,
                        static_cast<std::uint8_t>(kPayloadBytes), spec.payload});
  AttackSpec attack{subset, {}};
  if (n > 0) attack.entries.push_back({spec.target_id, PayloadPattern::exact(spec.payload), {spec.window}});
  return detail::merge_injected(capture, std::move(injected), std::move(attack));
}

// ---------------------------------------------------------------------------
// Desk-scale stand-in for the six-subset corpus
// ---------------------------------------------------------------------------

/// Background profile: eight periodic ECUs, about 360 frames per second.
/// Low bytes of 16-bit signals (0x0D0 D1, 0x1A0 D1, 0x6E0 D1/D3) span the
/// full byte range; every other ambient byte stays at or below 120.
inline AmbientProfile default_ambient_profile() {
  using G = ByteGenerator;
  auto c = [](int v) { return G::constant(v); };
  const auto low_byte = G::noisy_sensor(128, 127);
  AmbientProfile p;
  p.signals = {
      {0x0D0, 0.01, {G::noisy_sensor(40, 15), low_byte, c(0), c(0), G::counter(16), c(0),
                     G::noisy_sensor(80, 20), c(0)}},
      {0x0D1, 0.01, {G::noisy_sensor(40, 15), G::noisy_sensor(20, 10), G::noisy_sensor(40, 15),
                     G::noisy_sensor(20, 10), c(0), c(0), G::counter(16), c(0)}},
      {0x1A0, 0.02, {G::noisy_sensor(70, 30), low_byte, c(16), c(0), G::counter(16), c(0), c(0), c(0)}},
      {0x2B0, 0.02, {G::noisy_sensor(60, 40), c(0), c(1), c(0), c(0), c(0), G::counter(8), c(0)}},
      {0x3E9, 0.05, {G::noisy_sensor(90, 4), c(0), c(0), c(32), c(0), c(0), c(0), G::counter(16)}},
      {0x4C0, 0.1, {c(0), c(0), c(2), c(0), c(0), c(0), c(0), G::counter(16)}},
      {0x5A0, 0.1, {c(0), c(0), c(0), c(0), c(0), c(0), c(0), G::counter(4)}},
      {0x6E0, 0.05, {G::noisy_sensor(40, 10), low_byte, G::noisy_sensor(40, 10), low_byte, c(0), c(0), c(0),
                     G::counter(16)}},
  };
  return p;
}

struct SyntheticCorpusConfig {
  AmbientProfile ambient = default_ambient_profile();
  double duration = 23.0;  // seconds of ambient traffic per subset capture
  double fuzz_rate = 60.0;
  TimeWindow fuzz_window{8.0, 12.0};
  double fabrication_period = 0.04;
  TimeWindow fabrication_window{5.0, 15.0};
};

struct SubsetCapture {
  Subset subset;
  Capture capture;
  AttackSpec spec;
  std::vector<std::size_t> injected;
};

/// Fabrication target and payload used for each subset of the synthetic corpus.
inline FabricationSpec default_fabrication(Subset subset, const SyntheticCorpusConfig& cfg) {
  FabricationSpec f;
  f.period = cfg.fabrication_period;
  f.window = cfg.fabrication_window;
  switch (subset) {
    case Subset::MECTA: f.target_id = 0x3E9; f.payload = {0xFF, 0, 0, 32, 0, 0, 0, 0}; break;
    case Subset::MSA: f.target_id = 0x0D0; f.payload = {0xFF, 0xFF, 0, 0, 0, 0, 0xFF, 0}; break;
    case Subset::RLOFFA: f.target_id = 0x4C0; f.payload = {0, 0, 0, 0, 0, 0, 0, 26}; break;
    case Subset::RLONA: f.target_id = 0x4C0; f.payload = {0, 0, 0xFF, 0, 0xFF, 0, 0, 0}; break;
    case Subset::CSA: f.target_id = 0x6E0; f.payload = {62, 128, 18, 128, 0, 0, 0, 0}; break;
    case Subset::FA: break;
  }
  return f;
}

/// One capture per subset: ambient traffic plus that subset's injection.
/// Capture i uses derive_seed(seed, i) for ambient and derive_seed(seed, 100 + i)
/// for the injection.
inline std::vector<SubsetCapture> synthesize_corpus(const SyntheticCorpusConfig& cfg, std::uint64_t seed) {
  std::vector<SubsetCapture> out;
  for (std::size_t i = 0; i < kAllSubsets.size(); ++i) {
    const Subset subset = kAllSubsets[i];
    const Capture ambient = gen_ambient(cfg.ambient, cfg.duration, derive_seed(seed, i));
    InjectionResult injected =
        subset == Subset::FA
            ? inject_fuzzing(ambient, FuzzingSpec{cfg.fuzz_rate, cfg.fuzz_window}, subset, derive_seed(seed, 100 + i))
            : inject_fabrication(ambient, default_fabrication(subset, cfg), subset, derive_seed(seed, 100 + i));
    out.push_back({subset, std::move(injected.capture), std::move(injected.spec), std::move(injected.injected)});
  }
  return out;
}

}  // namespace canids
