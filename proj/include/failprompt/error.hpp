#pragma once

#include <stdexcept>
#include <string>

namespace failprompt {

enum class ErrorCode {
  ZeroVector = 1,
  DimensionMismatch,
  BadIndex,
  NonPositiveTemperature,
  NonFiniteValue,
  ShapeMismatch,
  UnknownTask,
  BadClusterIndex,
  EmptyPositiveSet,
  MissingFailureTexts,
  TooFewSamples,
  SizeMismatch,
  BadConfig,
  ArchetypeUnsupported,
  CorruptFile,
  VersionMismatch,
  BadHorizon,
  InsufficientData,
  InsufficientStratum,
  OneClassOnly,
  IoError,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace failprompt
