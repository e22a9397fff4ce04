#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace mira {

using Json = nlohmann::ordered_json;
using TokenId = std::int32_t;
using TokenSequence = std::vector<TokenId>;

// Recommendation lists never exceed this many instructions.
inline constexpr std::size_t kMaxRecommendations = 3;

inline constexpr std::string_view kReasoningOpen = "<REASONING>";
inline constexpr std::string_view kReasoningClose = "</REASONING>";
inline constexpr std::string_view kEndOfSequence = "<EOS>";

enum class Modality { kText, kImage };

// Image payloads are opaque to the engine: either a path the backend adapter
// reads, or the raw encoded bytes.
struct ImagePath {
  std::string path;
  bool operator==(const ImagePath&) const = default;
};
using ImageBytes = std::vector<std::uint8_t>;
using ImageRef = std::variant<ImagePath, ImageBytes>;

struct Trigger {
  std::string id;
  Modality modality = Modality::kText;
  std::optional<std::string> text;
  std::optional<ImageRef> image;
  std::map<std::string, std::string> metadata;

  bool operator==(const Trigger&) const = default;
};

// Throws InvariantViolation unless exactly the field matching `modality` is
// populated and the id is non-empty.
void Validate(const Trigger& trigger);

// Text the prompts use to stand in for the trigger: the body of a text
// trigger, or the caller-supplied "ocr_text" description of an image.
std::string DescribeTrigger(const Trigger& trigger);

struct Instruction {
  std::string id;
  std::string surface;
  TokenSequence token_ids;  // filled in against the active vocabulary

  bool operator==(const Instruction&) const = default;
};

struct InContextExample {
  std::string trigger_description;
  std::string reasoning;
  std::string instruction;

  bool operator==(const InContextExample&) const = default;
};

// A prompt with in-context examples is a dataset-construction prompt; one
// without is an inference prompt.
struct Prompt {
  std::string body;
  std::optional<std::vector<InContextExample>> in_context_examples;

  bool is_construction() const { return in_context_examples.has_value(); }
  bool operator==(const Prompt&) const = default;
};

enum class ReasoningStage {
  kEntityRecognition,
  kContextualRelevance,
  kInstructionGeneration,
};

// Label that opens a stage inside the delimited reasoning text, e.g.
// "Entity Recognition:".
std::string_view StageLabel(ReasoningStage stage);

struct ReasoningStep {
  ReasoningStage stage;
  std::string text;

  bool operator==(const ReasoningStep&) const = default;
};

struct ReasoningTrace {
  std::vector<ReasoningStep> steps;
  std::string raw;

  bool operator==(const ReasoningTrace&) const = default;
};

// Renders steps into the canonical delimited form:
//
//   <REASONING>
//   Entity Recognition: ...
//   Contextual Relevance: ...
//   Instruction Generation: ...
//   </REASONING>
std::string RenderReasoning(std::span<const ReasoningStep> steps);

// Builds a trace from steps; throws MalformedReasoning if the stage order or
// uniqueness rules are broken or a step text is empty.
ReasoningTrace MakeReasoningTrace(std::vector<ReasoningStep> steps);

// Parses model output into a trace. Surrounding whitespace is dropped; the
// remainder must start with <REASONING>, end with </REASONING>, and contain
// at least one stage, stages in fixed order, each at most once. Text outside
// a stage label is rejected.
ReasoningTrace ParseReasoning(std::string_view text);

// Throws MalformedReasoning unless `trace.raw` parses back to `trace.steps`.
void Validate(const ReasoningTrace& trace);

struct RecommendationResult {
  std::string trigger_id;
  ReasoningTrace reasoning;
  std::optional<std::string> template_used;
  std::vector<std::string> instructions;
  std::vector<double> scores;

  bool operator==(const RecommendationResult&) const = default;
};

// Checks list length (1..3), duplicates, score ordering and, when
// `library_ids` is non-empty, membership.
void Validate(const RecommendationResult& result,
              std::span<const std::string> library_ids = {});

// JSON encodings. Keys are emitted in a fixed order.
Json ToJson(const Trigger& trigger);
Trigger TriggerFromJson(const Json& json);
Json ToJson(const Instruction& instruction);
Instruction InstructionFromJson(const Json& json);
Json ToJson(const Prompt& prompt);
Prompt PromptFromJson(const Json& json);
Json ToJson(const ReasoningTrace& trace);
ReasoningTrace ReasoningTraceFromJson(const Json& json);
Json ToJson(const RecommendationResult& result);
RecommendationResult RecommendationResultFromJson(const Json& json);

std::string EncodeBase64(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> DecodeBase64(std::string_view text);

// Lowercases ASCII letters; other bytes pass through.
std::string ToLower(std::string_view text);
// Splits on ASCII whitespace, dropping empty pieces.
std::vector<std::string> SplitWords(std::string_view text);

}  // namespace mira
