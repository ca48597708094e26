#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace wcv {

enum class ErrorCode {
  InvalidInput,
  DimensionMismatch,
  NotPositiveSemidefinite,
  SingularMatrix,
  RankDeficient,
  MarginalMismatch,
  SingletonClass,
  EmptyPairSet,
  DegenerateWithinVariation,
  EmptyClass,
  EmptyCloud,
  IdMismatch,
  ParseError,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception. Every failure raised by wcv carries one of the
/// codes above so callers (and the CLI exit-code mapping) can branch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace wcv
