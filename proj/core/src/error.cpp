#include "badfusion/error.hpp"

namespace badfusion {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::TruncatedFile: return "TruncatedFile";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::MissingKey: return "MissingKey";
    case ErrorKind::WrongArity: return "WrongArity";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::MissingArtifact: return "MissingArtifact";
    case ErrorKind::MissingSplitFile: return "MissingSplitFile";
    case ErrorKind::OverlappingSplit: return "OverlappingSplit";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::OverlayTooLarge: return "OverlayTooLarge";
    case ErrorKind::OverlayOutOfBounds: return "OverlayOutOfBounds";
    case ErrorKind::NoPoints: return "NoPoints";
    case ErrorKind::RegionOutOfImage: return "RegionOutOfImage";
    case ErrorKind::MissingPrediction: return "MissingPrediction";
    case ErrorKind::InsufficientCandidates: return "InsufficientCandidates";
    case ErrorKind::EmptyManifest: return "EmptyManifest";
    case ErrorKind::FrameMismatch: return "FrameMismatch";
    case ErrorKind::NoAttackedVehicles: return "NoAttackedVehicles";
    case ErrorKind::CodecFailure: return "CodecFailure";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& detail)
    : std::runtime_error(std::string(to_string(kind)) + ": " + detail),
      kind_(kind),
      detail_(detail) {}

}  // namespace badfusion
