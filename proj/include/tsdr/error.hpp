#pragma once

#include <stdexcept>
#include <string>

namespace tsdr {

enum class ErrorCode {
  InvalidInput,
  SingularCovariance,
  DegenerateSlice,
  TooManySlices,
  InvalidSpec,
  DegenerateStack,
  UnknownModel,
  InsufficientData,
  EmptySelection,
  Parse,
};

const char* to_string(ErrorCode code);

/// Every failure raised by the library carries a machine-checkable code so
/// the experiment runner can classify per-replicate failures.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

}  // namespace tsdr
