#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace prx {

enum class ErrorCode {
  // hand model
  UnknownVariant,
  InvalidGeometry,
  DimensionMismatch,
  UnknownPhalanx,
  // linkage
  NotAssemblable,
  BranchJump,
  SingularConfiguration,
  // contact
  InvalidContact,
  // tactile
  SensorMismatch,
  WrongSensorSet,
  OutOfBounds,
  // session
  CountOutOfRange,
  StreamStalled,
  IoFailure,
  MissingStream,
  BadMagic,
  VersionUnsupported,
  CorruptIndex,
  CorruptChunk,
  // export / metrics
  TooShort,
  BadHorizon,
  InvalidConfig,
  EmptyInput,
  InvalidArgument,
  WrongStageCount,
  RateOutOfRange,
  EmptyStage,
};

std::string_view to_string(ErrorCode code);

// Domain error carrying a stable code. The CLI maps these to exit status 1.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace prx
