#pragma once

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "canids/error.hpp"
#include "canids/frame_codec.hpp"
#include "canids/rng.hpp"

namespace canids {

/// Attack subsets of the evaluation corpus: one fuzzing and five fabrication captures.
enum class Subset : std::uint8_t { FA, MECTA, MSA, RLOFFA, RLONA, CSA };

inline constexpr std::array<Subset, 6> kAllSubsets = {Subset::FA,     Subset::MECTA, Subset::MSA,
                                                      Subset::RLOFFA, Subset::RLONA, Subset::CSA};

constexpr std::string_view to_string(Subset s) noexcept {
  switch (s) {
    case Subset::FA: return "FA";
    case Subset::MECTA: return "MECTA";
    case Subset::MSA: return "MSA";
    case Subset::RLOFFA: return "RLOFFA";
    case Subset::RLONA: return "RLONA";
    case Subset::CSA: return "CSA";
  }
  return "?";
}

inline std::optional<Subset> parse_subset(std::string_view text) noexcept {
  for (Subset s : kAllSubsets)
    if (to_string(s) == text) return s;
  return std::nullopt;
}

struct LabeledRecord {
  FeatureVector features{};
  std::uint8_t label = 0;  // 0 benign, 1 malicious
  Subset subset = Subset::FA;
  std::uint16_t can_id = 0;

  friend bool operator==(const LabeledRecord&, const LabeledRecord&) = default;
};

/// Ordered records with class tallies kept in step on every insertion.
class Dataset {
 public:
  Dataset() = default;

  void add(const LabeledRecord& record) {
    if (record.label > 1) throw Error(ErrorCode::InvalidArgument, "label must be 0 or 1");
    records_.push_back(record);
    (record.label == 1 ? malicious_ : benign_)++;
  }

  void reserve(std::size_t n) { records_.reserve(n); }

  const std::vector<LabeledRecord>& records() const noexcept { return records_; }
  const LabeledRecord& operator[](std::size_t i) const noexcept { return records_[i]; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }
  std::size_t benign_count() const noexcept { return benign_; }
  std::size_t malicious_count() const noexcept { return malicious_; }

  auto begin() const noexcept { return records_.begin(); }
  auto end() const noexcept { return records_.end(); }

  template <typename Pred>
  Dataset filter(Pred&& keep) const {
    Dataset out;
    for (const auto& r : records_)
      if (keep(r)) out.add(r);
    return out;
  }

  Dataset with_label(std::uint8_t label) const {
    return filter([label](const LabeledRecord& r) { return r.label == label; });
  }

  Dataset with_subset(Subset subset) const {
    return filter([subset](const LabeledRecord& r) { return r.subset == subset; });
  }

  friend bool operator==(const Dataset& a, const Dataset& b) { return a.records_ == b.records_; }

 private:
  std::vector<LabeledRecord> records_;
  std::size_t benign_ = 0;
  std::size_t malicious_ = 0;
};

// ---------------------------------------------------------------------------
// Attack specifications
// ---------------------------------------------------------------------------

/// 16-nibble payload pattern; 'X' in the textual form matches any nibble.
struct PayloadPattern {
  std::array<std::uint8_t, 16> nibble{};
  std::array<bool, 16> wildcard{};

  static PayloadPattern exact(const Payload& p) noexcept {
    PayloadPattern out;
    for (std::size_t b = 0; b < kPayloadBytes; ++b) {
      out.nibble[2 * b] = p[b] >> 4;
      out.nibble[2 * b + 1] = p[b] & 0x0F;
    }
    return out;
  }

  /// Accepts up to 16 hex-or-X characters, left-padded with '0' like payloads.
  static PayloadPattern parse(std::string_view text) {
    if (text.size() > 16) throw Error(ErrorCode::TooLong, "payload pattern '" + std::string(text) + "'");
    PayloadPattern out;
    const std::size_t pad = 16 - text.size();
    for (std::size_t i = 0; i < text.size(); ++i) {
      const char c = text[i];
      if (c == 'X' || c == 'x') {
        out.wildcard[pad + i] = true;
        continue;
      }
      const int digit = detail::hex_value(c);
      if (digit < 0) throw Error(ErrorCode::BadHexDigit, "payload pattern '" + std::string(text) + "'");
      out.nibble[pad + i] = static_cast<std::uint8_t>(digit);
    }
    return out;
  }

  bool matches(const Payload& p) const noexcept {
    for (std::size_t i = 0; i < 16; ++i) {
      if (wildcard[i]) continue;
      const std::uint8_t v = (i % 2 == 0) ? (p[i / 2] >> 4) : (p[i / 2] & 0x0F);
      if (v != nibble[i]) return false;
    }
    return true;
  }

  std::string to_string() const {
    static constexpr char kHex[] = "0123456789ABCDEF";
    std::string out(16, '0');
    for (std::size_t i = 0; i < 16; ++i) out[i] = wildcard[i] ? 'X' : kHex[nibble[i]];
    return out;
  }

  friend bool operator==(const PayloadPattern&, const PayloadPattern&) = default;
};

struct TimeWindow {
  double start = 0.0;
  double end = 0.0;  // closed interval [start, end]

  bool contains(double t) const noexcept { return t >= start && t <= end; }
  friend bool operator==(const TimeWindow&, const TimeWindow&) = default;
};

struct AttackEntry {
  std::optional<std::uint16_t> can_id;  // nullopt matches every id
  PayloadPattern pattern;
  std::vector<TimeWindow> windows;

  friend bool operator==(const AttackEntry&, const AttackEntry&) = default;
};

/// Ground truth for one capture: which frames were injected.
///
/// Text format, one directive per line, `#` starts a comment:
///
///     subset=MSA
///     attack id=0D0 payload=XXXXFFFFXXXXXXXX window=5.000000:10.000000,20.5:21
///
/// `id` is hex, or XXX to match any id; `payload` is 1..16 hex digits (left-padded with 0) where X matches any
/// nibble; `window` is a comma-separated list of closed intervals start:end
/// in capture seconds.
struct AttackSpec {
  Subset subset = Subset::FA;
  std::vector<AttackEntry> entries;

  friend bool operator==(const AttackSpec&, const AttackSpec&) = default;
};

inline std::string serialize_attack_spec(const AttackSpec& spec) {
  std::ostringstream out;
  out << "# canids attack spec v1\n";
  out << "subset=" << to_string(spec.subset) << "\n";
  for (const auto& e : spec.entries) {
    out << "attack id=" << (e.can_id ? format_can_id(*e.can_id) : std::string("XXX")) << " payload=" << e.pattern.to_string() << " window=";
    for (std::size_t i = 0; i < e.windows.size(); ++i) {
      if (i) out << ",";
      out << format_timestamp(e.windows[i].start) << ":" << format_timestamp(e.windows[i].end);
    }
    out << "\n";
  }
  return out.str();
}

inline AttackSpec parse_attack_spec(std::istream& in) {
  AttackSpec spec;
  bool have_subset = false;
  std::string line;
  std::size_t line_no = 0;
  auto fail = [&](const std::string& why) {
    throw Error(ErrorCode::SchemaMismatch, "attack spec line " + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view text = line;
    if (auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    text = detail::trim(text);
    if (text.empty()) continue;

    if (text.starts_with("subset=")) {
      auto s = parse_subset(text.substr(7));
      if (!s) fail("unknown subset '" + std::string(text.substr(7)) + "'");
      spec.subset = *s;
      have_subset = true;
      continue;
    }
    if (!text.starts_with("attack ")) fail("expected 'subset=' or 'attack'");

    AttackEntry entry;
    bool have_id = false, have_payload = false, have_window = false;
    std::istringstream tokens{std::string(text.substr(7))};
    std::string token;
    while (tokens >> token) {
      const auto eq = token.find('=');
      if (eq == std::string::npos) fail("expected key=value, got '" + token + "'");
      const std::string key = token.substr(0, eq);
      const std::string value = token.substr(eq + 1);
      try {
        if (key == "id") {
          if (value == "XXX" || value == "xxx") entry.can_id.reset();
          else entry.can_id = detail::parse_can_id(value, line);
          have_id = true;
        } else if (key == "payload") {
          entry.pattern = PayloadPattern::parse(value);
          have_payload = true;
        } else if (key == "window") {
          std::string_view rest = value;
          while (!rest.empty()) {
            const auto comma = rest.find(',');
            const std::string_view item = rest.substr(0, comma);
            const auto colon = item.find(':');
            if (colon == std::string_view::npos) fail("window needs start:end");
            TimeWindow w{detail::parse_timestamp(item.substr(0, colon), line),
                         detail::parse_timestamp(item.substr(colon + 1), line)};
            if (w.end < w.start) fail("window end before start");
            entry.windows.push_back(w);
            rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
          }
          have_window = true;
        } else {
          fail("unknown key '" + key + "'");
        }
      } catch (const Error& e) {
        if (e.code() == ErrorCode::SchemaMismatch) throw;
        fail(e.message());
      }
    }
    if (!have_id || !have_payload || !have_window) fail("attack needs id, payload and window");
    spec.entries.push_back(std::move(entry));
  }
  if (!have_subset) throw Error(ErrorCode::SchemaMismatch, "attack spec has no subset= line");
  return spec;
}

inline AttackSpec load_attack_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  return parse_attack_spec(in);
}

inline void save_attack_spec(const AttackSpec& spec, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path);
  out << serialize_attack_spec(spec);
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path);
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// A frame is malicious iff some entry matches its id, its payload pattern
/// and one of its windows.
inline std::vector<LabeledRecord> label_frames(const std::vector<CanFrame>& frames, const AttackSpec& spec) {
  if (frames.empty()) throw Error(ErrorCode::EmptyCapture, "no frames to label");
  std::unordered_map<std::uint16_t, std::vector<const AttackEntry*>> by_id;
  std::vector<const AttackEntry*> any_id;
  for (const auto& e : spec.entries) (e.can_id ? by_id[*e.can_id] : any_id).push_back(&e);

  auto matches = [](const AttackEntry& e, const CanFrame& f) {
    return e.pattern.matches(f.payload) && std::any_of(e.windows.begin(), e.windows.end(), [&](const TimeWindow& w) {
             return w.contains(f.timestamp);
           });
  };

  std::vector<LabeledRecord> out;
  out.reserve(frames.size());
  for (const auto& f : frames) {
    LabeledRecord r{features(f), 0, spec.subset, f.can_id};
    if (auto it = by_id.find(f.can_id); it != by_id.end())
      r.label = std::any_of(it->second.begin(), it->second.end(), [&](const AttackEntry* e) { return matches(*e, f); });
    if (!r.label)
      r.label = std::any_of(any_id.begin(), any_id.end(), [&](const AttackEntry* e) { return matches(*e, f); });
    out.push_back(r);
  }
  return out;
}

inline Dataset make_dataset(const std::vector<LabeledRecord>& records) {
  Dataset ds;
  ds.reserve(records.size());
  for (const auto& r : records) ds.add(r);
  return ds;
}

inline Dataset merge_subsets(const std::vector<Dataset>& subsets) {
  if (subsets.empty()) throw Error(ErrorCode::InvalidArgument, "merge needs at least one subset");
  std::size_t total = 0;
  for (const auto& s : subsets) total += s.size();
  Dataset out;
  out.reserve(total);
  for (const auto& s : subsets)
    for (const auto& r : s) out.add(r);
  return out;
}

/// floor(fraction * n), tolerant of binary rounding when the product is integral.
inline std::size_t class_train_count(std::size_t n, double fraction) noexcept {
  return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 1e-9));
}

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

/// Stratified partition: within each class the record indices are shuffled
/// with the stream derive_seed(seed, label) and the first
/// floor(fraction * class_size) go to train. Both outputs are returned in
/// original record order.
inline SplitIndices split_indices(const Dataset& ds, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw Error(ErrorCode::InvalidArgument, "train fraction must be in (0, 1)");
  if (ds.benign_count() == 0 || ds.malicious_count() == 0)
    throw Error(ErrorCode::ClassAbsent, "split needs both classes");

  SplitIndices out;
  std::vector<std::uint8_t> in_train(ds.size(), 0);
  for (std::uint8_t label : {std::uint8_t{0}, std::uint8_t{1}}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ds.size(); ++i)
      if (ds[i].label == label) members.push_back(i);
    Rng rng(derive_seed(seed, label));
    rng.shuffle(std::span<std::size_t>(members));
    const std::size_t k = class_train_count(members.size(), fraction);
    for (std::size_t j = 0; j < k; ++j) in_train[members[j]] = 1;
  }
  for (std::size_t i = 0; i < ds.size(); ++i) (in_train[i] ? out.train : out.test).push_back(i);
  return out;
}

inline std::pair<Dataset, Dataset> split(const Dataset& ds, double fraction, std::uint64_t seed) {
  const SplitIndices idx = split_indices(ds, fraction, seed);
  Dataset train, test;
  train.reserve(idx.train.size());
  test.reserve(idx.test.size());
  for (auto i : idx.train) train.add(ds[i]);
  for (auto i : idx.test) test.add(ds[i]);
  return {std::move(train), std::move(test)};
}

// ---------------------------------------------------------------------------
// CSV persistence: subset,id,d0,...,d7,label
// ---------------------------------------------------------------------------

inline constexpr std::string_view kDatasetCsvHeader = "subset,id,d0,d1,d2,d3,d4,d5,d6,d7,label";

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

inline bool parse_uint(std::string_view text, unsigned max_value, unsigned& out) noexcept {
  if (text.empty()) return false;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc{} && ptr == text.data() + text.size() && out <= max_value;
}

inline std::uint16_t parse_csv_id(std::string_view text) {
  try {
    return parse_can_id(text, text);
  } catch (const Error& e) {
    throw Error(ErrorCode::SchemaMismatch, e.message());
  }
}

}  // namespace detail

inline void write_csv(const Dataset& ds, std::ostream& out) {
  out << kDatasetCsvHeader << "\n";
  for (const auto& r : ds) {
    out << to_string(r.subset) << "," << format_can_id(r.can_id);
    for (auto b : r.features) out << "," << static_cast<unsigned>(b);
    out << "," << static_cast<unsigned>(r.label) << "\n";
  }
}

inline Dataset read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || detail::trim(line) != kDatasetCsvHeader)
    throw Error(ErrorCode::SchemaMismatch, "missing dataset header '" + std::string(kDatasetCsvHeader) + "'");
  Dataset ds;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = detail::trim(line);
    if (text.empty()) continue;
    auto fail = [&](const std::string& why) {
      throw Error(ErrorCode::SchemaMismatch, "line " + std::to_string(line_no) + ": " + why);
    };
    const auto fields = detail::split_csv(text);
    if (fields.size() != 11) fail("expected 11 fields");
    LabeledRecord r;
    const auto subset = parse_subset(fields[0]);
    if (!subset) fail("unknown subset");
    r.subset = *subset;
    r.can_id = detail::parse_csv_id(fields[1]);
    for (std::size_t b = 0; b < kNumFeatures; ++b) {
      unsigned v = 0;
      if (!detail::parse_uint(fields[2 + b], 255, v)) fail("byte d" + std::to_string(b) + " not in 0..255");
      r.features[b] = static_cast<std::uint8_t>(v);
    }
    unsigned label = 0;
    if (!detail::parse_uint(fields[10], 1, label)) fail("label must be 0 or 1");
    r.label = static_cast<std::uint8_t>(label);
    ds.add(r);
  }
  return ds;
}

inline void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoFailure, "cannot write " + path);
  write_csv(ds, out);
  if (!out) throw Error(ErrorCode::IoFailure, "write failed: " + path);
}

inline Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoFailure, "cannot open " + path);
  return read_csv(in);
}

}  // namespace canids
