#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bpm {

enum class ErrorCode {
  MissingBrainReference,
  InvalidLambda,
  InvalidConfig,
  InvariantViolation,
  ParseError,
  IoError,
  MissingAssets,
  DegenerateSpec,
  SchemaError,
  MissingImageFile,
  ChecksumMismatch,
  ShapeMismatch,
  UnknownVersion,
  MissingStimulus,
  DuplicateStimulus,
  NoActiveUnits,
  LengthMismatch,
  ZeroVariance,
  NoUsableUnits,
  DegenerateAccuracy,
  LabelMismatch,
  AllGroupsDegenerate,
  TooFewUnits,
  NonpositiveBrainReference,
  RankDeficient,
  ColumnMismatch,
  CoincidentCentroids,
  UnsortableDepths,
  MissingContainer,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace bpm
