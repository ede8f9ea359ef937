#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace canids {

enum class ErrorCode {
  MalformedLine,
  IdOutOfRange,
  BadHexDigit,
  TooLong,
  EmptyCapture,
  ClassAbsent,
  IoFailure,
  SchemaMismatch,
  EmptyProfile,
  WindowOutOfRange,
  NonFiniteLoss,
  NotDifferentiable,
  EmptySlice,
  EmptyMatrix,
  InvalidArgument,
  InvalidConfig,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::IdOutOfRange: return "IdOutOfRange";
    case ErrorCode::BadHexDigit: return "BadHexDigit";
    case ErrorCode::TooLong: return "TooLong";
    case ErrorCode::EmptyCapture: return "EmptyCapture";
    case ErrorCode::ClassAbsent: return "ClassAbsent";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::SchemaMismatch: return "SchemaMismatch";
    case ErrorCode::EmptyProfile: return "EmptyProfile";
    case ErrorCode::WindowOutOfRange: return "WindowOutOfRange";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::NotDifferentiable: return "NotDifferentiable";
    case ErrorCode::EmptySlice: return "EmptySlice";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-checkable code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

  // Same error tagged with the pipeline stage it escaped from.
  Error(std::string_view stage, const Error& inner)
      : std::runtime_error("stage " + std::string(stage) + ": " + inner.what()),
        code_(inner.code_),
        message_(inner.message_) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& message() const noexcept { return message_; }

 private:
  ErrorCode code_;
  std::string message_;
};

}  // namespace canids
