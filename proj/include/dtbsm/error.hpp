#pragma once

#include <stdexcept>
#include <string>

namespace dtbsm {

/// Failure categories raised by the core library. The C API maps each one
/// onto a stable dtbsm_status value.
enum class ErrorCode {
  InvalidArgument,
  Parse,
  Io,
  RowNotStochastic,
  BadGamma,
  NonFiniteEntry,
  ActionOutOfRange,
  ShapeMismatch,
  GammaMismatch,
  NotADistribution,
  CostShapeMismatch,
  NoSamples,
  SamplerOutOfRange,
  Coverage,
  StateSpaceTooLarge,
  InfeasibleDemand,
  InvariantViolation,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace dtbsm
