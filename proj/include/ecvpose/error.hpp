#pragma once

#include <stdexcept>
#include <string>

namespace ecvpose {

/// Failure categories surfaced through exceptions and the CLI exit path.
enum class ErrorCode {
  DegenerateGeometry,
  EmptyInput,
  InvalidFilter,
  InvalidParameter,
  InsufficientSupport,
  CoincidentPoints,
  InsufficientNeighbors,
  NoCandidates,
  DegenerateSample,
  NoConsensus,
  NoOverlap,
  AlignmentFailed,
  RankDeficient,
  InvalidSpec,
  ParseError,
  DimensionMismatch,
  VersionMismatch,
  InvalidConfig,
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateGeometry: return "DegenerateGeometry";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidFilter: return "InvalidFilter";
    case ErrorCode::InvalidParameter: return "InvalidParameter";
    case ErrorCode::InsufficientSupport: return "InsufficientSupport";
    case ErrorCode::CoincidentPoints: return "CoincidentPoints";
    case ErrorCode::InsufficientNeighbors: return "InsufficientNeighbors";
    case ErrorCode::NoCandidates: return "NoCandidates";
    case ErrorCode::DegenerateSample: return "DegenerateSample";
    case ErrorCode::NoConsensus: return "NoConsensus";
    case ErrorCode::NoOverlap: return "NoOverlap";
    case ErrorCode::AlignmentFailed: return "AlignmentFailed";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace ecvpose
