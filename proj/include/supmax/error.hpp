#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace supmax {

enum class ErrorKind {
  DimensionError,
  DimensionMismatch,
  NotPSD,
  NotSymmetric,
  NonFinite,
  SingularMatrix,
  SingularAfterRegularize,
  IndexError,
  ZeroVariance,
  InvalidParameter,
  NegativeOrder,
  SfConditionViolated,
  StrongConditionViolated,
  QuadratureNonconvergence,
  DegenerateCorrelation,
  GenerationExhausted,
  ParseError,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::DimensionError: return "DimensionError";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::NotPSD: return "NotPSD";
    case ErrorKind::NotSymmetric: return "NotSymmetric";
    case ErrorKind::NonFinite: return "NonFinite";
    case ErrorKind::SingularMatrix: return "SingularMatrix";
    case ErrorKind::SingularAfterRegularize: return "SingularAfterRegularize";
    case ErrorKind::IndexError: return "IndexError";
    case ErrorKind::ZeroVariance: return "ZeroVariance";
    case ErrorKind::InvalidParameter: return "InvalidParameter";
    case ErrorKind::NegativeOrder: return "NegativeOrder";
    case ErrorKind::SfConditionViolated: return "SfConditionViolated";
    case ErrorKind::StrongConditionViolated: return "StrongConditionViolated";
    case ErrorKind::QuadratureNonconvergence: return "QuadratureNonconvergence";
    case ErrorKind::DegenerateCorrelation: return "DegenerateCorrelation";
    case ErrorKind::GenerationExhausted: return "GenerationExhausted";
    case ErrorKind::ParseError: return "ParseError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries a machine-readable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace supmax
