// Licensed under the Apache License 2.0 (see LICENSE file).

#include "ruleshap/error.hpp"

namespace ruleshap {

const char* error_code_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kSchema: return "schema";
    case ErrorCode::kRange: return "range";
    case ErrorCode::kParse: return "parse";
    case ErrorCode::kEmptyInput: return "empty_input";
    case ErrorCode::kDomain: return "domain";
    case ErrorCode::kDimension: return "dimension";
    case ErrorCode::kIo: return "io";
    case ErrorCode::kConfig: return "config";
    case ErrorCode::kProvider: return "provider";
    case ErrorCode::kEvaluation: return "evaluation";
    case ErrorCode::kContract: return "contract";
    case ErrorCode::kInsufficientData: return "insufficient_data";
  }
  return "unknown";
}

}  // namespace ruleshap
