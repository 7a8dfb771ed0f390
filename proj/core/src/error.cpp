#include "paradram/error.hpp"

namespace paradram {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::BadDimension: return "BadDimension";
    case ErrorCode::NonFiniteDensity: return "NonFiniteDensity";
    case ErrorCode::StageOutOfRange: return "StageOutOfRange";
    case ErrorCode::InvalidAlpha: return "InvalidAlpha";
    case ErrorCode::NonFiniteStart: return "NonFiniteStart";
    case ErrorCode::EmptyRange: return "EmptyRange";
    case ErrorCode::SeriesTooShort: return "SeriesTooShort";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::CorruptRestart: return "CorruptRestart";
    case ErrorCode::SpecMismatch: return "SpecMismatch";
    case ErrorCode::CorruptChain: return "CorruptChain";
  }
  return "Unknown";
}

}  // namespace paradram
