#include "failprompt/error.hpp"

namespace failprompt {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ZeroVector: return "ZeroVector";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::BadIndex: return "BadIndex";
    case ErrorCode::NonPositiveTemperature: return "NonPositiveTemperature";
    case ErrorCode::NonFiniteValue: return "NonFiniteValue";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::UnknownTask: return "UnknownTask";
    case ErrorCode::BadClusterIndex: return "BadClusterIndex";
    case ErrorCode::EmptyPositiveSet: return "EmptyPositiveSet";
    case ErrorCode::MissingFailureTexts: return "MissingFailureTexts";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::SizeMismatch: return "SizeMismatch";
    case ErrorCode::BadConfig: return "BadConfig";
    case ErrorCode::ArchetypeUnsupported: return "ArchetypeUnsupported";
    case ErrorCode::CorruptFile: return "CorruptFile";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::BadHorizon: return "BadHorizon";
    case ErrorCode::InsufficientData: return "InsufficientData";
    case ErrorCode::InsufficientStratum: return "InsufficientStratum";
    case ErrorCode::OneClassOnly: return "OneClassOnly";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace failprompt
