#pragma once

#include <cmath>
#include <cstdint>
#include <span>

#include "canids/error.hpp"

namespace canids {

struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const noexcept { return tp + tn + fp + fn; }

  /// Tally one prediction against its true label.
  void add(int truth, int predicted) noexcept {
    if (truth == 1) (predicted == 1 ? tp : fn)++;
    else (predicted == 1 ? fp : tn)++;
  }

  ConfusionMatrix& operator+=(const ConfusionMatrix& o) noexcept {
    tp += o.tp;
    tn += o.tn;
    fp += o.fp;
    fn += o.fn;
    return *this;
  }

  friend ConfusionMatrix operator+(ConfusionMatrix a, const ConfusionMatrix& b) noexcept { return a += b; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

inline ConfusionMatrix count_confusion(std::span<const int> truth, std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw Error(ErrorCode::InvalidArgument, "label lists differ in length");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < truth.size(); ++i) cm.add(truth[i], predicted[i]);
  return cm;
}

/// Matthews correlation coefficient. Numerator is exact in 128-bit
/// integers; the two denominator pair-products are exact too and only the
/// square roots are rounded. Zero when any marginal is empty.
inline double mcc(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error(ErrorCode::EmptyMatrix, "MCC of an empty matrix");
  using i128 = __int128;
  const i128 num = static_cast<i128>(cm.tp) * cm.tn - static_cast<i128>(cm.fp) * cm.fn;
  const i128 a = static_cast<i128>(cm.tp) + cm.fp;
  const i128 b = static_cast<i128>(cm.tp) + cm.fn;
  const i128 c = static_cast<i128>(cm.tn) + cm.fp;
  const i128 d = static_cast<i128>(cm.tn) + cm.fn;
  if (a == 0 || b == 0 || c == 0 || d == 0) return 0.0;
  const long double den = std::sqrt(static_cast<long double>(a * b)) * std::sqrt(static_cast<long double>(c * d));
  return static_cast<double>(static_cast<long double>(num) / den);
}

/// 2tp / (2tp + fp + fn); zero when nothing was positive in truth or prediction.
inline double f1(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error(ErrorCode::EmptyMatrix, "F1 of an empty matrix");
  const std::uint64_t den = 2 * cm.tp + cm.fp + cm.fn;
  if (den == 0) return 0.0;
  return static_cast<double>(2 * cm.tp) / static_cast<double>(den);
}

/// Induced false-alarm rate over an adversarial benign-only slice.
inline double asr_fp(const ConfusionMatrix& cm_adv) {
  const std::uint64_t n = cm_adv.tn + cm_adv.fp;
  if (n == 0) throw Error(ErrorCode::EmptySlice, "ASR_FP needs benign samples");
  return static_cast<double>(cm_adv.fp) / static_cast<double>(n);
}

/// Missed-attack rate over an adversarial malicious-only slice.
inline double asr_fn(const ConfusionMatrix& cm_adv) {
  const std::uint64_t n = cm_adv.tp + cm_adv.fn;
  if (n == 0) throw Error(ErrorCode::EmptySlice, "ASR_FN needs malicious samples");
  return static_cast<double>(cm_adv.fn) / static_cast<double>(n);
}

}  // namespace canids
