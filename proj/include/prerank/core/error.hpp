/*
 * Copyright 2026 The Prerank Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace prerank {

enum class ErrorCode {
  kInvalidArgument,
  kEmptyQuery,
  kMalformedLine,
  kBadField,
  kEventAfterAsOf,
  kNonAdjacentDelta,
  kWindowMismatch,
  kDimensionMismatch,
  kDomainError,
  kBatchTooSmall,
  kNonFiniteLoss,
  kEmptySplit,
  kDuplicateItem,
  kLayoutMismatch,
  kEmptyCandidates,
  kMissingFeatures,
  kLengthMismatch,
  kEmptyInput,
  kIoError,
  kFormatError,
  kDigestMismatch,
  kBadRequest,
};

inline const char* ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "INVALID_ARGUMENT";
    case ErrorCode::kEmptyQuery: return "EMPTY_QUERY";
    case ErrorCode::kMalformedLine: return "MALFORMED_LINE";
    case ErrorCode::kBadField: return "BAD_FIELD";
    case ErrorCode::kEventAfterAsOf: return "EVENT_AFTER_AS_OF";
    case ErrorCode::kNonAdjacentDelta: return "NON_ADJACENT_DELTA";
    case ErrorCode::kWindowMismatch: return "WINDOW_MISMATCH";
    case ErrorCode::kDimensionMismatch: return "DIMENSION_MISMATCH";
    case ErrorCode::kDomainError: return "DOMAIN_ERROR";
    case ErrorCode::kBatchTooSmall: return "BATCH_TOO_SMALL";
    case ErrorCode::kNonFiniteLoss: return "NON_FINITE_LOSS";
    case ErrorCode::kEmptySplit: return "EMPTY_SPLIT";
    case ErrorCode::kDuplicateItem: return "DUPLICATE_ITEM";
    case ErrorCode::kLayoutMismatch: return "LAYOUT_MISMATCH";
    case ErrorCode::kEmptyCandidates: return "EMPTY_CANDIDATES";
    case ErrorCode::kMissingFeatures: return "MISSING_FEATURES";
    case ErrorCode::kLengthMismatch: return "LENGTH_MISMATCH";
    case ErrorCode::kEmptyInput: return "EMPTY_INPUT";
    case ErrorCode::kIoError: return "IO_ERROR";
    case ErrorCode::kFormatError: return "FORMAT_ERROR";
    case ErrorCode::kDigestMismatch: return "DIGEST_MISMATCH";
    case ErrorCode::kBadRequest: return "BAD_REQUEST";
  }
  return "UNKNOWN";
}

// Every failure in the library surfaces as an Error carrying a stable code.
// Parse failures also carry the 1-based line number (0 when not applicable).
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::size_t line = 0)
      : std::runtime_error(Format(code, message, line)),
        code_(code),
        line_(line),
        detail_(line > 0 ? "line " + std::to_string(line) + ": " + message : message) {}

  ErrorCode code() const { return code_; }
  std::size_t line() const { return line_; }
  // The message without the code prefix.
  const std::string& detail() const { return detail_; }

 private:
  static std::string Format(ErrorCode code, const std::string& message,
                            std::size_t line) {
    std::string out = ErrorCodeName(code);
    if (line > 0) out += " (line " + std::to_string(line) + ")";
    out += ": ";
    out += message;
    return out;
  }

  ErrorCode code_;
  std::size_t line_;
  std::string detail_;
};

}  // namespace prerank
