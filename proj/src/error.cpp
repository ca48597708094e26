#include "wcv/error.hpp"

namespace wcv {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::NotPositiveSemidefinite: return "NotPositiveSemidefinite";
    case ErrorCode::SingularMatrix: return "SingularMatrix";
    case ErrorCode::RankDeficient: return "RankDeficient";
    case ErrorCode::MarginalMismatch: return "MarginalMismatch";
    case ErrorCode::SingletonClass: return "SingletonClass";
    case ErrorCode::EmptyPairSet: return "EmptyPairSet";
    case ErrorCode::DegenerateWithinVariation: return "DegenerateWithinVariation";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::EmptyCloud: return "EmptyCloud";
    case ErrorCode::IdMismatch: return "IdMismatch";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace wcv
