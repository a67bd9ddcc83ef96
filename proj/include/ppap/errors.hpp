#pragma once

#include <stdexcept>
#include <string>

namespace ppap {

enum class ErrorKind {
  MalformedHeader,
  TruncatedPayload,
  NonFiniteValue,
  NormalizationMismatch,
  ZeroVector,
  IoFailure,
  DimensionMismatch,
  ConfigInvalid,
  ParseError,
  EmptyPositiveSet,
  CriterionInversion,
  MissingLabels,
  NumericFailure,
};

inline const char* error_kind_name(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedHeader: return "malformed header";
    case ErrorKind::TruncatedPayload: return "truncated payload";
    case ErrorKind::NonFiniteValue: return "non-finite value";
    case ErrorKind::NormalizationMismatch: return "normalization mismatch";
    case ErrorKind::ZeroVector: return "zero vector";
    case ErrorKind::IoFailure: return "i/o failure";
    case ErrorKind::DimensionMismatch: return "dimension mismatch";
    case ErrorKind::ConfigInvalid: return "invalid config";
    case ErrorKind::ParseError: return "parse error";
    case ErrorKind::EmptyPositiveSet: return "empty positive set";
    case ErrorKind::CriterionInversion: return "criterion inversion";
    case ErrorKind::MissingLabels: return "missing labels";
    case ErrorKind::NumericFailure: return "numeric failure";
  }
  return "unknown error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace ppap
