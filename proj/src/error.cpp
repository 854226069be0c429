#include "ltsim/error.hpp"

namespace ltsim {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NotPositiveSemidefinite: return "NotPositiveSemidefinite";
    case ErrorCode::NegativeStart: return "NegativeStart";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::NegativeEntry: return "NegativeEntry";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::TooLarge: return "TooLarge";
    case ErrorCode::NonFiniteNoise: return "NonFiniteNoise";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::PreconditionViolated: return "PreconditionViolated";
    case ErrorCode::Unsupported: return "Unsupported";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::DomainError: return "DomainError";
    case ErrorCode::EmptySample: return "EmptySample";
    case ErrorCode::CFLViolation: return "CFLViolation";
    case ErrorCode::MassLoss: return "MassLoss";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

void fail(ErrorCode code, const std::string& what) {
  throw Error(code, std::string(to_string(code)) + ": " + what);
}

}  // namespace ltsim
