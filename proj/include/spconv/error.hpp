#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spconv {

enum class ErrorCode {
  Io,
  ParseError,
  MissingColumn,
  NonPositiveProductivity,
  InvalidCovariate,
  RaggedPanel,
  DuplicateRegion,
  MissingYear,
  UnknownSector,
  MissingCovariate,
  MissingCovariates,
  NonPositiveCutoff,
  InvalidWeights,
  DimensionMismatch,
  RegionOrderMismatch,
  NotRowStandardized,
  DegenerateVariance,
  EmptyWeights,
  TooFewRegions,
  TooFewObservations,
  RankDeficient,
  NonConvergence,
  InvalidCoefficient,
  MissingWeights,
  InvalidConfig,
};

constexpr std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Io: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::MissingColumn: return "MissingColumn";
    case ErrorCode::NonPositiveProductivity: return "NonPositiveProductivity";
    case ErrorCode::InvalidCovariate: return "InvalidCovariate";
    case ErrorCode::RaggedPanel: return "RaggedPanel";
    case ErrorCode::DuplicateRegion: return "DuplicateRegion";
    case ErrorCode::MissingYear: return "MissingYear";
    case ErrorCode::UnknownSector: return "UnknownSector";
    case ErrorCode::MissingCovariate: return "MissingCovariate";
    case ErrorCode::MissingCovariates: return "MissingCovariates";
    case ErrorCode::NonPositiveCutoff: return "NonPositiveCutoff";
    case ErrorCode::InvalidWeights: return "InvalidWeights";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::RegionOrderMismatch: return "RegionOrderMismatch";
    case ErrorCode::NotRowStandardized: return "NotRowStandardized";
    case ErrorCode::DegenerateVariance: return "DegenerateVariance";
    case ErrorCode::EmptyWeights: return "EmptyWeights";
    case ErrorCode::TooFewRegions: return "TooFewRegions";
    case ErrorCode::TooFewObservations: return "TooFewObservations";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::NonConvergence: return "NonConvergence";
    case ErrorCode::InvalidCoefficient: return "InvalidCoefficient";
    case ErrorCode::MissingWeights: return "MissingWeights";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "UnknownError";
}

/// Every failure raised by the library. `code()` identifies the error class;
/// the message carries the location (row, column, region) where one exists.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_name(code)) + ": " + message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }
  [[nodiscard]] std::string_view name() const noexcept { return error_name(code_); }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace spconv
