#pragma once

#include <stdexcept>
#include <string>

namespace entangle {

enum class ErrorCode {
  DimensionMismatch,
  NotHermitian,
  NotSymmetric,
  ConvergenceFailure,
  DegenerateBlockFailure,
  NotPositive,
  NonPositiveInput,
  InvalidState,
  SupportViolation,
  RankDeficient,
  RankDeficientSigma,
  TildeOrthonormalityFailure,
  SimplexViolation,
  SingularFilter,
  BoundaryViolation,
  SupportCollapse,
  Format,
  Io,
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotHermitian: return "NotHermitian";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::ConvergenceFailure: return "ConvergenceFailure";
    case ErrorCode::DegenerateBlockFailure: return "DegenerateBlockFailure";
    case ErrorCode::NotPositive: return "NotPositive";
    case ErrorCode::NonPositiveInput: return "NonPositiveInput";
    case ErrorCode::InvalidState: return "InvalidState";
    case ErrorCode::SupportViolation: return "SupportViolation";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::RankDeficientSigma: return "RankDeficientSigma";
    case ErrorCode::TildeOrthonormalityFailure: return "TildeOrthonormalityFailure";
    case ErrorCode::SimplexViolation: return "SimplexViolation";
    case ErrorCode::SingularFilter: return "SingularFilter";
    case ErrorCode::BoundaryViolation: return "BoundaryViolation";
    case ErrorCode::SupportCollapse: return "SupportCollapse";
    case ErrorCode::Format: return "Format";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised when a matrix that must be positive semidefinite is not; carries
/// the offending eigenvalue so callers can tell how far outside they are.
class NotPositiveError : public Error {
 public:
  NotPositiveError(const std::string& what, double min_eigenvalue)
      : Error(ErrorCode::NotPositive, what), min_eigenvalue_(min_eigenvalue) {}

  double min_eigenvalue() const noexcept { return min_eigenvalue_; }

 private:
  double min_eigenvalue_;
};

}  // namespace entangle
