#include "prx/error.hpp"

namespace prx {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownVariant: return "UnknownVariant";
    case ErrorCode::InvalidGeometry: return "InvalidGeometry";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::UnknownPhalanx: return "UnknownPhalanx";
    case ErrorCode::NotAssemblable: return "NotAssemblable";
    case ErrorCode::BranchJump: return "BranchJump";
    case ErrorCode::SingularConfiguration: return "SingularConfiguration";
    case ErrorCode::InvalidContact: return "InvalidContact";
    case ErrorCode::SensorMismatch: return "SensorMismatch";
    case ErrorCode::WrongSensorSet: return "WrongSensorSet";
    case ErrorCode::OutOfBounds: return "OutOfBounds";
    case ErrorCode::CountOutOfRange: return "CountOutOfRange";
    case ErrorCode::StreamStalled: return "StreamStalled";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::MissingStream: return "MissingStream";
    case ErrorCode::BadMagic: return "BadMagic";
    case ErrorCode::VersionUnsupported: return "VersionUnsupported";
    case ErrorCode::CorruptIndex: return "CorruptIndex";
    case ErrorCode::CorruptChunk: return "CorruptChunk";
    case ErrorCode::TooShort: return "TooShort";
    case ErrorCode::BadHorizon: return "BadHorizon";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::WrongStageCount: return "WrongStageCount";
    case ErrorCode::RateOutOfRange: return "RateOutOfRange";
    case ErrorCode::EmptyStage: return "EmptyStage";
  }
  return "Unknown";
}

}  // namespace prx
