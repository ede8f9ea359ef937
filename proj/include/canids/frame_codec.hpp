#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "canids/error.hpp"

namespace canids {

inline constexpr std::size_t kPayloadBytes = 8;
inline constexpr std::size_t kNumFeatures = kPayloadBytes;
inline constexpr std::uint32_t kMaxStandardId = 0x7FF;

using Payload = std::array<std::uint8_t, kPayloadBytes>;

/// D0..D7 as the IDS sees them: integral byte values.
using FeatureVector = std::array<std::uint8_t, kNumFeatures>;

/// Continuous point in raw byte coordinates, used while crafting and for
/// model internals. Integral whenever it reaches an IDS for evaluation.
using Point = std::array<double, kNumFeatures>;

inline Point to_point(const FeatureVector& x) noexcept {
  Point p{};
  for (std::size_t i = 0; i < kNumFeatures; ++i) p[i] = static_cast<double>(x[i]);
  return p;
}

struct CanFrame {
  double timestamp = 0.0;
  std::uint16_t can_id = 0;
  std::uint8_t dlc = 0;
  Payload payload{};

  friend bool operator==(const CanFrame&, const CanFrame&) = default;
};

namespace detail {

inline int hex_value(char c) noexcept {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

inline std::string_view trim(std::string_view s) noexcept {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r' || s.back() == '\n'))
    s.remove_suffix(1);
  return s;
}

inline double parse_timestamp(std::string_view text, std::string_view line) {
  text = trim(text);
  double value = 0.0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (text.empty() || ec != std::errc{} || ptr != end || !std::isfinite(value) || value < 0.0)
    throw Error(ErrorCode::MalformedLine, "bad timestamp in '" + std::string(line) + "'");
  return value;
}

inline std::uint16_t parse_can_id(std::string_view text, std::string_view line) {
  text = trim(text);
  if (text.empty() || text.size() > 8)
    throw Error(ErrorCode::MalformedLine, "bad CAN id in '" + std::string(line) + "'");
  std::uint32_t value = 0;
  for (char c : text) {
    const int digit = hex_value(c);
    if (digit < 0) throw Error(ErrorCode::BadHexDigit, "CAN id '" + std::string(text) + "'");
    value = (value << 4) | static_cast<std::uint32_t>(digit);
  }
  if (value > kMaxStandardId)
    throw Error(ErrorCode::IdOutOfRange, "CAN id 0x" + std::string(text) + " exceeds 0x7FF");
  return static_cast<std::uint16_t>(value);
}

}  // namespace detail

/// Left-pad `data_hex` with '0' to 16 characters and split it into eight
/// big-endian bytes D0..D7.
inline Payload normalize_payload(std::string_view data_hex) {
  if (data_hex.size() > 2 * kPayloadBytes)
    throw Error(ErrorCode::TooLong, "payload '" + std::string(data_hex) + "' longer than 16 hex chars");
  std::array<int, 2 * kPayloadBytes> nibbles{};
  const std::size_t pad = nibbles.size() - data_hex.size();
  for (std::size_t i = 0; i < data_hex.size(); ++i) {
    const int digit = detail::hex_value(data_hex[i]);
    if (digit < 0) throw Error(ErrorCode::BadHexDigit, "payload '" + std::string(data_hex) + "'");
    nibbles[pad + i] = digit;
  }
  Payload out{};
  for (std::size_t b = 0; b < kPayloadBytes; ++b)
    out[b] = static_cast<std::uint8_t>(nibbles[2 * b] * 16 + nibbles[2 * b + 1]);
  return out;
}

/// Parse one capture line. Accepted forms:
///   candump:  `(<timestamp>) <iface> <ID-hex>#<data-hex>`
///   CSV:      `timestamp,id_hex,dlc,data_hex`
/// Short data fields are zero-padded on the left. Extended (29-bit) ids are
/// rejected with IdOutOfRange.
inline CanFrame parse_log_line(std::string_view line) {
  const std::string_view text = detail::trim(line);
  if (text.empty()) throw Error(ErrorCode::MalformedLine, "empty line");

  CanFrame frame;
  if (text.front() == '(') {
    const auto close = text.find(')');
    if (close == std::string_view::npos)
      throw Error(ErrorCode::MalformedLine, "missing ')' in '" + std::string(line) + "'");
    frame.timestamp = detail::parse_timestamp(text.substr(1, close - 1), line);

    std::string_view rest = detail::trim(text.substr(close + 1));
    const auto space = rest.find_first_of(" \t");
    if (space == std::string_view::npos)
      throw Error(ErrorCode::MalformedLine, "missing interface in '" + std::string(line) + "'");
    rest = detail::trim(rest.substr(space + 1));
    if (rest.find_first_of(" \t") != std::string_view::npos)
      throw Error(ErrorCode::MalformedLine, "trailing fields in '" + std::string(line) + "'");

    const auto hash = rest.find('#');
    if (hash == std::string_view::npos)
      throw Error(ErrorCode::MalformedLine, "missing '#' in '" + std::string(line) + "'");
    frame.can_id = detail::parse_can_id(rest.substr(0, hash), line);
    const std::string_view data = rest.substr(hash + 1);
    frame.payload = normalize_payload(data);
    frame.dlc = static_cast<std::uint8_t>((data.size() + 1) / 2);
    return frame;
  }

  std::array<std::string_view, 4> fields;
  std::string_view rest = text;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    const auto comma = rest.find(',');
    if (i + 1 < fields.size()) {
      if (comma == std::string_view::npos)
        throw Error(ErrorCode::MalformedLine, "expected 4 CSV fields in '" + std::string(line) + "'");
      fields[i] = rest.substr(0, comma);
      rest = rest.substr(comma + 1);
    } else {
      if (comma != std::string_view::npos)
        throw Error(ErrorCode::MalformedLine, "expected 4 CSV fields in '" + std::string(line) + "'");
      fields[i] = rest;
    }
  }
  frame.timestamp = detail::parse_timestamp(fields[0], line);
  frame.can_id = detail::parse_can_id(fields[1], line);

  const std::string_view dlc_text = detail::trim(fields[2]);
  unsigned dlc = 0;
  auto [ptr, ec] = std::from_chars(dlc_text.data(), dlc_text.data() + dlc_text.size(), dlc);
  if (dlc_text.empty() || ec != std::errc{} || ptr != dlc_text.data() + dlc_text.size() || dlc > 8)
    throw Error(ErrorCode::MalformedLine, "bad dlc in '" + std::string(line) + "'");
  frame.dlc = static_cast<std::uint8_t>(dlc);
  frame.payload = normalize_payload(detail::trim(fields[3]));
  return frame;
}

/// The IDS feature view of a frame: its eight payload bytes, nothing else.
inline FeatureVector features(const CanFrame& frame) noexcept { return frame.payload; }

inline std::string format_can_id(std::uint16_t id) {
  char buf[8];
  std::snprintf(buf, sizeof buf, "%03X", static_cast<unsigned>(id));
  return buf;
}

inline std::string format_timestamp(double t) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", t);
  return buf;
}

/// candump text. The data field holds the trailing `dlc` bytes, which is
/// where left-padding put the original data.
inline std::string to_candump(const CanFrame& frame, std::string_view iface = "can0") {
  std::string out = "(" + format_timestamp(frame.timestamp) + ") " + std::string(iface) + " " +
                    format_can_id(frame.can_id) + "#";
  char buf[4];
  for (std::size_t b = kPayloadBytes - frame.dlc; b < kPayloadBytes; ++b) {
    std::snprintf(buf, sizeof buf, "%02X", static_cast<unsigned>(frame.payload[b]));
    out += buf;
  }
  return out;
}

inline constexpr std::string_view kCanonicalCsvHeader = "timestamp,id,dlc,d0,d1,d2,d3,d4,d5,d6,d7";

/// Canonical CSV row: `timestamp,id,dlc,d0,...,d7`, id as 3-digit uppercase hex.
inline std::string to_canonical_csv(const CanFrame& frame) {
  std::string out = format_timestamp(frame.timestamp) + "," + format_can_id(frame.can_id) + "," +
                    std::to_string(frame.dlc);
  for (auto byte : frame.payload) out += "," + std::to_string(byte);
  return out;
}

/// Parse a whole capture. Blank lines, `#` comments and a CSV header
/// starting with "timestamp" are skipped. Errors name the 1-based line.
inline std::vector<CanFrame> parse_log(std::istream& in) {
  std::vector<CanFrame> frames;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string_view text = detail::trim(line);
    if (text.empty() || text.front() == '#' || text.starts_with("timestamp")) continue;
    try {
      frames.push_back(parse_log_line(text));
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.message());
    }
  }
  return frames;
}

}  // namespace canids
