// Licensed under the Apache License 2.0 (see LICENSE file).

#pragma once

#include <stdexcept>
#include <string>

namespace ruleshap {

// Mirrors rs_status in ruleshap.h; the C layer maps one to the other.
enum class ErrorCode {
  kInvalidArgument = 1,
  kSchema,
  kRange,
  kParse,
  kEmptyInput,
  kDomain,
  kDimension,
  kIo,
  kConfig,
  kProvider,
  kEvaluation,
  kContract,
  kInsufficientData,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace ruleshap
