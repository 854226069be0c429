#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace ltsim {

enum class ErrorCode {
  InvalidArgument,
  NotSymmetric,
  NotPositiveSemidefinite,
  NegativeStart,
  IndexOutOfRange,
  NegativeEntry,
  NoConvergence,
  TooLarge,
  NonFiniteNoise,
  DimensionMismatch,
  PreconditionViolated,
  Unsupported,
  OutOfRange,
  DomainError,
  EmptySample,
  CFLViolation,
  MassLoss,
  ConfigError,
  IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Library-wide exception. The code identifies the failed contract; the
/// message carries the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& what);

}  // namespace ltsim
