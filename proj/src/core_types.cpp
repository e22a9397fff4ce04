#include "mira/core_types.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <limits>
#include <set>

#include "mira/error.hpp"

namespace mira {

namespace {

constexpr std::array<ReasoningStage, 3> kStages = {
    ReasoningStage::kEntityRecognition,
    ReasoningStage::kContextualRelevance,
    ReasoningStage::kInstructionGeneration,
};

std::string_view Trim(std::string_view s) {
  const auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

[[noreturn]] void Malformed(const std::string& what) {
  throw Error(ErrorCode::kMalformedReasoning, what);
}

// Returns the stage whose label opens `line`, if any.
std::optional<ReasoningStage> LeadingStage(std::string_view line) {
  for (ReasoningStage stage : kStages) {
    if (line.starts_with(StageLabel(stage))) return stage;
  }
  return std::nullopt;
}

const Json& Require(const Json& json, const char* key) {
  if (!json.is_object() || !json.contains(key)) {
    throw Error(ErrorCode::kInvariantViolation, std::string("missing field '") + key + "'");
  }
  return json.at(key);
}

std::string RequireString(const Json& json, const char* key) {
  const Json& value = Require(json, key);
  if (!value.is_string()) {
    throw Error(ErrorCode::kInvariantViolation, std::string("field '") + key + "' must be a string");
  }
  return value.get<std::string>();
}

constexpr std::string_view kBase64Alphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

}  // namespace

void Validate(const Trigger& trigger) {
  if (trigger.id.empty()) {
    throw Error(ErrorCode::kInvariantViolation, "trigger id is empty");
  }
  const bool text_modality = trigger.modality == Modality::kText;
  if (text_modality && (!trigger.text || trigger.image)) {
    throw Error(ErrorCode::kInvariantViolation,
                "text trigger '" + trigger.id + "' must carry text and no image");
  }
  if (!text_modality && (!trigger.image || trigger.text)) {
    throw Error(ErrorCode::kInvariantViolation,
                "image trigger '" + trigger.id + "' must carry an image and no text");
  }
}

std::string DescribeTrigger(const Trigger& trigger) {
  if (trigger.modality == Modality::kText) return trigger.text.value_or("");
  if (auto it = trigger.metadata.find("ocr_text"); it != trigger.metadata.end()) {
    return it->second;
  }
  return "[image]";
}

std::string_view StageLabel(ReasoningStage stage) {
  switch (stage) {
    case ReasoningStage::kEntityRecognition: return "Entity Recognition:";
    case ReasoningStage::kContextualRelevance: return "Contextual Relevance:";
    case ReasoningStage::kInstructionGeneration: return "Instruction Generation:";
  }
  return "";
}

std::string RenderReasoning(std::span<const ReasoningStep> steps) {
  std::string out(kReasoningOpen);
  out += '\n';
  for (const ReasoningStep& step : steps) {
    out += StageLabel(step.stage);
    out += ' ';
    out += step.text;
    out += '\n';
  }
  out += kReasoningClose;
  return out;
}

ReasoningTrace ParseReasoning(std::string_view text) {
  const std::string_view raw = Trim(text);
  if (!raw.starts_with(kReasoningOpen)) Malformed("reasoning must start with <REASONING>");
  if (raw.size() < kReasoningOpen.size() + kReasoningClose.size() ||
      !raw.ends_with(kReasoningClose)) {
    Malformed("reasoning must end with </REASONING>");
  }
  std::string_view body = raw.substr(
      kReasoningOpen.size(), raw.size() - kReasoningOpen.size() - kReasoningClose.size());
  if (body.find(kReasoningOpen) != std::string_view::npos ||
      body.find(kReasoningClose) != std::string_view::npos) {
    Malformed("nested reasoning delimiters");
  }

  std::vector<ReasoningStep> steps;
  std::string current;
  int last_index = -1;
  const auto flush = [&] {
    if (steps.empty()) return;
    std::string_view trimmed = Trim(current);
    if (trimmed.empty()) {
      Malformed("empty text for stage '" + std::string(StageLabel(steps.back().stage)) + "'");
    }
    steps.back().text = std::string(trimmed);
  };

  while (!body.empty()) {
    const std::size_t eol = body.find('\n');
    std::string_view line = body.substr(0, eol);
    body = eol == std::string_view::npos ? std::string_view{} : body.substr(eol + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    const std::string_view trimmed = Trim(line);
    if (auto stage = LeadingStage(trimmed)) {
      const int index = static_cast<int>(*stage);
      if (index <= last_index) {
        Malformed("stage '" + std::string(StageLabel(*stage)) + "' out of order or repeated");
      }
      flush();
      last_index = index;
      steps.push_back({*stage, {}});
      current = std::string(trimmed.substr(StageLabel(*stage).size()));
      continue;
    }
    if (steps.empty()) {
      if (!trimmed.empty()) Malformed("text outside of any reasoning stage");
      continue;
    }
    current += '\n';
    current += line;
  }
  flush();
  if (steps.empty()) Malformed("reasoning contains no stages");
  return ReasoningTrace{std::move(steps), std::string(raw)};
}

ReasoningTrace MakeReasoningTrace(std::vector<ReasoningStep> steps) {
  ReasoningTrace trace = ParseReasoning(RenderReasoning(steps));
  if (trace.steps != steps) {
    Malformed("steps do not survive rendering (untrimmed text or embedded stage labels)");
  }
  return trace;
}

void Validate(const ReasoningTrace& trace) {
  const ReasoningTrace parsed = ParseReasoning(trace.raw);
  if (parsed.raw != trace.raw || parsed.steps != trace.steps) {
    Malformed("raw reasoning text does not match its parsed steps");
  }
}

void Validate(const RecommendationResult& result, std::span<const std::string> library_ids) {
  const auto fail = [&](const std::string& what) {
    throw Error(ErrorCode::kInvariantViolation,
                "recommendation for '" + result.trigger_id + "': " + what);
  };
  if (result.instructions.empty() || result.instructions.size() > kMaxRecommendations) {
    fail("must hold between 1 and 3 instructions");
  }
  if (result.scores.size() != result.instructions.size()) fail("scores not parallel to instructions");
  std::set<std::string> seen;
  for (const std::string& id : result.instructions) {
    if (!seen.insert(id).second) fail("duplicate instruction '" + id + "'");
    if (!library_ids.empty() &&
        std::find(library_ids.begin(), library_ids.end(), id) == library_ids.end()) {
      fail("instruction '" + id + "' is not in the library");
    }
  }
  for (std::size_t i = 1; i < result.scores.size(); ++i) {
    if (std::isnan(result.scores[i]) || !(result.scores[i] <= result.scores[i - 1])) {
      fail("scores must be non-increasing");
    }
  }
}

Json ToJson(const Trigger& trigger) {
  Json out;
  out["id"] = trigger.id;
  out["modality"] = trigger.modality == Modality::kText ? "text" : "image";
  if (trigger.text) out["text"] = *trigger.text;
  if (trigger.image) {
    if (const auto* path = std::get_if<ImagePath>(&*trigger.image)) {
      out["image_path"] = path->path;
    } else {
      out["image_b64"] = EncodeBase64(std::get<ImageBytes>(*trigger.image));
    }
  }
  out["metadata"] = Json::object();
  for (const auto& [key, value] : trigger.metadata) out["metadata"][key] = value;
  return out;
}

Trigger TriggerFromJson(const Json& json) {
  Trigger trigger;
  trigger.id = RequireString(json, "id");
  const std::string modality = RequireString(json, "modality");
  if (modality == "text") {
    trigger.modality = Modality::kText;
  } else if (modality == "image") {
    trigger.modality = Modality::kImage;
  } else {
    throw Error(ErrorCode::kInvariantViolation, "unknown modality '" + modality + "'");
  }
  if (json.contains("text")) trigger.text = RequireString(json, "text");
  if (json.contains("image_path")) {
    trigger.image = ImagePath{RequireString(json, "image_path")};
  } else if (json.contains("image_b64")) {
    trigger.image = DecodeBase64(RequireString(json, "image_b64"));
  }
  if (json.contains("metadata")) {
    for (const auto& [key, value] : json.at("metadata").items()) {
      trigger.metadata[key] = value.get<std::string>();
    }
  }
  Validate(trigger);
  return trigger;
}

Json ToJson(const Instruction& instruction) {
  Json out;
  out["id"] = instruction.id;
  out["surface"] = instruction.surface;
  return out;
}

Instruction InstructionFromJson(const Json& json) {
  if (json.is_string()) {
    const auto surface = json.get<std::string>();
    return Instruction{surface, surface, {}};
  }
  Instruction instruction;
  instruction.surface = RequireString(json, "surface");
  instruction.id = json.contains("id") ? RequireString(json, "id") : instruction.surface;
  if (instruction.id.empty() || Trim(instruction.surface).empty()) {
    throw Error(ErrorCode::kInvariantViolation, "instruction id and surface must be non-empty");
  }
  return instruction;
}

Json ToJson(const Prompt& prompt) {
  Json out;
  out["body"] = prompt.body;
  if (prompt.in_context_examples) {
    out["in_context_examples"] = Json::array();
    for (const InContextExample& ex : *prompt.in_context_examples) {
      Json item;
      item["trigger"] = ex.trigger_description;
      item["reasoning"] = ex.reasoning;
      item["instruction"] = ex.instruction;
      out["in_context_examples"].push_back(std::move(item));
    }
  }
  return out;
}

Prompt PromptFromJson(const Json& json) {
  Prompt prompt;
  prompt.body = RequireString(json, "body");
  if (json.contains("in_context_examples")) {
    prompt.in_context_examples.emplace();
    for (const Json& item : json.at("in_context_examples")) {
      prompt.in_context_examples->push_back({RequireString(item, "trigger"),
                                             RequireString(item, "reasoning"),
                                             RequireString(item, "instruction")});
    }
  }
  return prompt;
}

Json ToJson(const ReasoningTrace& trace) { return Json(trace.raw); }

ReasoningTrace ReasoningTraceFromJson(const Json& json) {
  if (!json.is_string()) throw Error(ErrorCode::kMalformedReasoning, "reasoning must be a string");
  return ParseReasoning(json.get<std::string>());
}

Json ToJson(const RecommendationResult& result) {
  Json out;
  out["trigger_id"] = result.trigger_id;
  out["reasoning"] = result.reasoning.raw;
  out["template_used"] = result.template_used ? Json(*result.template_used) : Json(nullptr);
  out["instructions"] = result.instructions;
  // JSON has no infinities; a fully masked path is written as null.
  out["scores"] = Json::array();
  for (double score : result.scores) {
    out["scores"].push_back(std::isfinite(score) ? Json(score) : Json(nullptr));
  }
  return out;
}

RecommendationResult RecommendationResultFromJson(const Json& json) {
  RecommendationResult result;
  result.trigger_id = RequireString(json, "trigger_id");
  result.reasoning = ReasoningTraceFromJson(Require(json, "reasoning"));
  if (const Json& used = Require(json, "template_used"); !used.is_null()) {
    result.template_used = used.get<std::string>();
  }
  result.instructions = Require(json, "instructions").get<std::vector<std::string>>();
  for (const Json& score : Require(json, "scores")) {
    result.scores.push_back(score.is_null() ? -std::numeric_limits<double>::infinity()
                                            : score.get<double>());
  }
  return result;
}

std::string EncodeBase64(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const std::uint32_t n = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kBase64Alphabet[(n >> 18) & 63];
    out += kBase64Alphabet[(n >> 12) & 63];
    out += kBase64Alphabet[(n >> 6) & 63];
    out += kBase64Alphabet[n & 63];
  }
  if (const std::size_t rest = bytes.size() - i; rest > 0) {
    std::uint32_t n = bytes[i] << 16;
    if (rest == 2) n |= bytes[i + 1] << 8;
    out += kBase64Alphabet[(n >> 18) & 63];
    out += kBase64Alphabet[(n >> 12) & 63];
    out += rest == 2 ? kBase64Alphabet[(n >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> DecodeBase64(std::string_view text) {
  if (text.size() % 4 != 0) throw Error(ErrorCode::kInvariantViolation, "bad base64 length");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::uint32_t n = 0;
    int padding = 0;
    for (std::size_t j = 0; j < 4; ++j) {
      const char c = text[i + j];
      std::uint32_t value = 0;
      if (c == '=' && i + 4 == text.size() && j >= 2) {
        ++padding;
      } else {
        const std::size_t pos = kBase64Alphabet.find(c);
        if (pos == std::string_view::npos || padding > 0) {
          throw Error(ErrorCode::kInvariantViolation, "bad base64 character");
        }
        value = static_cast<std::uint32_t>(pos);
      }
      n = (n << 6) | value;
    }
    out.push_back(static_cast<std::uint8_t>(n >> 16));
    if (padding < 2) out.push_back(static_cast<std::uint8_t>(n >> 8));
    if (padding < 1) out.push_back(static_cast<std::uint8_t>(n));
  }
  return out;
}

std::string ToLower(std::string_view text) {
  std::string out(text);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::vector<std::string> SplitWords(std::string_view text) {
  std::vector<std::string> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) words.emplace_back(text.substr(start, i - start));
  }
  return words;
}

}  // namespace mira
