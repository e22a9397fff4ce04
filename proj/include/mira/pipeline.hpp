#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "mira/core_types.hpp"
#include "mira/error.hpp"
#include "mira/instruction_trie.hpp"
#include "mira/model_backend.hpp"
#include "mira/template_library.hpp"

namespace mira {

enum class PipelineStage { kConstruction, kInitialReasoning, kRetrieval, kRefinement, kDecode };

std::string_view ToString(PipelineStage stage);

// An error raised inside one pipeline stage. Keeps the original code.
class StageError : public Error {
 public:
  StageError(PipelineStage stage, const Error& cause)
      : Error(cause.code(), "[" + std::string(ToString(stage)) + "] " + cause.detail()),
        stage_(stage) {}

  PipelineStage stage() const noexcept { return stage_; }

 private:
  PipelineStage stage_;
};

// Scorer that asks `backend` for next-token logits, sending `prompt` and
// `trigger` with each prefix.
Scorer MakeBackendScorer(ModelBackend& backend, Prompt prompt, Trigger trigger,
                         std::size_t vocab_size);

struct PipelineOptions {
  std::size_t beam_width = 0;  // 0: width k
};

// Request prompts built by the pipeline. Exposed so scripts and tests can
// predict exactly what the backend will see.
Prompt InitialReasoningPrompt(const Trigger& trigger);
Prompt RefinementPrompt(const Template& tmpl, const Trigger& trigger);
Prompt DecodePrompt(const Trigger& trigger, const ReasoningTrace& reasoning);
Prompt ConstructionRequestPrompt(const Prompt& construction, const Trigger& trigger,
                                 const Instruction& gold);

class Pipeline {
 public:
  Pipeline(std::shared_ptr<ModelBackend> backend, std::shared_ptr<const TrieStore> tries,
           std::shared_ptr<TemplateLibrary> templates, PipelineOptions options = {});

  // Teacher-forced reasoning for a (trigger, gold instruction) pair. The
  // prompt must carry in-context examples and the gold instruction must be
  // in the published library (PreconditionViolation otherwise). Backend text
  // that is not a well-formed trace raises MalformedReasoning.
  ReasoningTrace ConstructReasoningSample(const Prompt& construction, const Trigger& trigger,
                                          const Instruction& gold) const;

  // initial reasoning -> template retrieval on that reasoning -> at most one
  // refinement pass -> top-k constrained decode. Requires 1 <= k <= 3.
  // Failures are rethrown as StageError.
  RecommendationResult Infer(const Trigger& trigger, const RetrievalConfig& cfg,
                             std::size_t k) const;

  TemplateLibrary& templates() const { return *templates_; }
  ModelBackend& backend() const { return *backend_; }
  std::shared_ptr<const InstructionTrie> trie() const;

 private:
  std::shared_ptr<ModelBackend> backend_;
  std::shared_ptr<const TrieStore> tries_;
  std::shared_ptr<TemplateLibrary> templates_;
  PipelineOptions options_;
};

struct SftSample {
  Trigger trigger;
  Instruction instruction;
  ReasoningTrace reasoning;
};

struct SkippedSample {
  std::size_t index = 0;
  std::string reason;
};

struct ExportReport {
  std::size_t written = 0;
  std::vector<SkippedSample> skipped;
};

// {"trigger": {...}, "reasoning": "<REASONING>...</REASONING>", "instruction": str}
Json SftRecord(const SftSample& sample);

// Writes one JSON line per valid sample (the file is truncated first).
// Samples failing validation are skipped and reported; an unwritable path
// throws IOFailure.
ExportReport ExportSftDataset(std::span<const SftSample> samples, const std::filesystem::path& path);

}  // namespace mira
