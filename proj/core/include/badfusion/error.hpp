#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace badfusion {

enum class ErrorKind {
  TruncatedFile,
  NonFiniteValue,
  MissingKey,
  WrongArity,
  ParseError,
  MissingArtifact,
  MissingSplitFile,
  OverlappingSplit,
  IoError,
  OverlayTooLarge,
  OverlayOutOfBounds,
  NoPoints,
  RegionOutOfImage,
  MissingPrediction,
  InsufficientCandidates,
  EmptyManifest,
  FrameMismatch,
  NoAttackedVehicles,
  CodecFailure,
  SchemaError,
  InvalidArgument,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// All library failures are reported through this exception. what() is
/// prefixed with the kind name so diagnostics always name the failure.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

}  // namespace badfusion
