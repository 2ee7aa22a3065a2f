#include "dtbsm/error.hpp"

namespace dtbsm {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Parse: return "ParseError";
    case ErrorCode::Io: return "IoError";
    case ErrorCode::RowNotStochastic: return "RowNotStochastic";
    case ErrorCode::BadGamma: return "BadGamma";
    case ErrorCode::NonFiniteEntry: return "NonFiniteEntry";
    case ErrorCode::ActionOutOfRange: return "ActionOutOfRange";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::GammaMismatch: return "GammaMismatch";
    case ErrorCode::NotADistribution: return "NotADistribution";
    case ErrorCode::CostShapeMismatch: return "CostShapeMismatch";
    case ErrorCode::NoSamples: return "NoSamples";
    case ErrorCode::SamplerOutOfRange: return "SamplerOutOfRange";
    case ErrorCode::Coverage: return "CoverageError";
    case ErrorCode::StateSpaceTooLarge: return "StateSpaceTooLarge";
    case ErrorCode::InfeasibleDemand: return "InfeasibleDemand";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
  }
  return "Unknown";
}

}  // namespace dtbsm
