#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace latsta {

enum class ErrorKind {
  InvalidArgument,
  UnreachableControl,
  DegenerateCenter,
  NoUniqueMinimum,
  SingularSystem,
  RhoVanishes,
  DivisionByZeroCurvature,
  NegativeRealFrequency,
  JunctionMismatch,
  NoConvergence,
  DelocalizedResult,
  NormDrift,
  NanDetected,
  GridMismatch,
  ThresholdNotFound,
  Config,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::UnreachableControl: return "unreachable-control";
    case ErrorKind::DegenerateCenter: return "degenerate-center";
    case ErrorKind::NoUniqueMinimum: return "no-unique-minimum";
    case ErrorKind::SingularSystem: return "singular-system";
    case ErrorKind::RhoVanishes: return "rho-vanishes";
    case ErrorKind::DivisionByZeroCurvature: return "division-by-zero-curvature";
    case ErrorKind::NegativeRealFrequency: return "negative-real-frequency";
    case ErrorKind::JunctionMismatch: return "junction-mismatch";
    case ErrorKind::NoConvergence: return "no-convergence";
    case ErrorKind::DelocalizedResult: return "delocalized-result";
    case ErrorKind::NormDrift: return "norm-drift";
    case ErrorKind::NanDetected: return "nan-detected";
    case ErrorKind::GridMismatch: return "grid-mismatch";
    case ErrorKind::ThresholdNotFound: return "threshold-not-found";
    case ErrorKind::Config: return "config";
  }
  return "unknown";
}

/// Exception type for every failure signalled by the library. The kind is
/// stable and machine-readable; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace latsta
