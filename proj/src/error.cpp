#include "mira/error.hpp"

namespace mira {

std::string_view ToString(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kPreconditionViolation: return "PreconditionViolation";
    case ErrorCode::kEmptyLibrary: return "EmptyLibrary";
    case ErrorCode::kUnknownToken: return "UnknownToken";
    case ErrorCode::kDuplicateInstruction: return "DuplicateInstruction";
    case ErrorCode::kInvalidPrefix: return "InvalidPrefix";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kScorerFailure: return "ScorerFailure";
    case ErrorCode::kKTooLarge: return "KTooLarge";
    case ErrorCode::kEmptyText: return "EmptyText";
    case ErrorCode::kDegenerateEmbedding: return "DegenerateEmbedding";
    case ErrorCode::kZeroNorm: return "ZeroNorm";
    case ErrorCode::kEmbeddingFailure: return "EmbeddingFailure";
    case ErrorCode::kDuplicateId: return "DuplicateId";
    case ErrorCode::kSummarizerFailure: return "SummarizerFailure";
    case ErrorCode::kMalformedTemplateResponse: return "MalformedTemplateResponse";
    case ErrorCode::kBackendUnreachable: return "BackendUnreachable";
    case ErrorCode::kNoScriptMatch: return "NoScriptMatch";
    case ErrorCode::kMalformedResponse: return "MalformedResponse";
    case ErrorCode::kMalformedReasoning: return "MalformedReasoning";
    case ErrorCode::kInvariantViolation: return "InvariantViolation";
    case ErrorCode::kIOFailure: return "IOFailure";
    case ErrorCode::kLengthMismatch: return "LengthMismatch";
    case ErrorCode::kUnknownInstructionId: return "UnknownInstructionId";
  }
  return "Unknown";
}

ErrorCategory CategoryOf(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kKTooLarge:
      return ErrorCategory::kUsage;
    case ErrorCode::kIOFailure:
      return ErrorCategory::kIO;
    case ErrorCode::kScorerFailure:
    case ErrorCode::kSummarizerFailure:
    case ErrorCode::kBackendUnreachable:
    case ErrorCode::kNoScriptMatch:
    case ErrorCode::kMalformedResponse:
    case ErrorCode::kMalformedReasoning:
    case ErrorCode::kMalformedTemplateResponse:
    case ErrorCode::kEmbeddingFailure:
      return ErrorCategory::kBackend;
    default:
      return ErrorCategory::kInvariant;
  }
}

}  // namespace mira
