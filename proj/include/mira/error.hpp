#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mira {

enum class ErrorCode {
  kInvalidArgument,
  kPreconditionViolation,
  kEmptyLibrary,
  kUnknownToken,
  kDuplicateInstruction,
  kInvalidPrefix,
  kDimensionMismatch,
  kScorerFailure,
  kKTooLarge,
  kEmptyText,
  kDegenerateEmbedding,
  kZeroNorm,
  kEmbeddingFailure,
  kDuplicateId,
  kSummarizerFailure,
  kMalformedTemplateResponse,
  kBackendUnreachable,
  kNoScriptMatch,
  kMalformedResponse,
  kMalformedReasoning,
  kInvariantViolation,
  kIOFailure,
  kLengthMismatch,
  kUnknownInstructionId,
};

// Coarse grouping used for process exit codes.
enum class ErrorCategory { kUsage = 1, kIO = 2, kBackend = 3, kInvariant = 4 };

std::string_view ToString(ErrorCode code);
ErrorCategory CategoryOf(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(ToString(code)) + ": " + message),
        code_(code),
        detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  // Message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace mira
