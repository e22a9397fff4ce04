#include "mira/pipeline.hpp"

#include <fstream>

#include "mira/prompts.hpp"

namespace mira {

namespace {

std::string TriggerSection(const Trigger& trigger) {
  return "Trigger (" + std::string(trigger.modality == Modality::kText ? "text" : "image") +
         "): " + DescribeTrigger(trigger);
}

template <typename Fn>
auto RunStage(PipelineStage stage, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e);
  } catch (const std::exception& e) {
    throw StageError(stage, Error(ErrorCode::kInvariantViolation, e.what()));
  }
}

}  // namespace

std::string_view ToString(PipelineStage stage) {
  switch (stage) {
    case PipelineStage::kConstruction: return "construction";
    case PipelineStage::kInitialReasoning: return "initial_reasoning";
    case PipelineStage::kRetrieval: return "retrieval";
    case PipelineStage::kRefinement: return "refinement";
    case PipelineStage::kDecode: return "decode";
  }
  return "unknown";
}

Scorer MakeBackendScorer(ModelBackend& backend, Prompt prompt, Trigger trigger,
                         std::size_t vocab_size) {
  return [&backend, prompt = std::move(prompt), trigger = std::move(trigger),
          vocab_size](std::span<const TokenId> prefix) {
    BackendRequest request{prompt, trigger, BackendMode::kScoreTokens,
                           TokenSequence(prefix.begin(), prefix.end())};
    return backend.ScoreTokens(request, vocab_size);
  };
}

Prompt InitialReasoningPrompt(const Trigger& trigger) {
  Prompt prompt = prompts::Inference();
  prompt.body += "\n\n" + TriggerSection(trigger);
  return prompt;
}

Prompt RefinementPrompt(const Template& tmpl, const Trigger& trigger) {
  Prompt prompt = prompts::Inference();
  prompt.body += "\n\n";
  prompt.body += prompts::kTemplateHeader;
  prompt.body += " " + tmpl.name + "\n";
  for (std::size_t i = 0; i < tmpl.steps.size(); ++i) {
    prompt.body += std::to_string(i + 1) + ". " + tmpl.steps[i] + "\n";
  }
  prompt.body += "\n" + TriggerSection(trigger);
  return prompt;
}

Prompt DecodePrompt(const Trigger& trigger, const ReasoningTrace& reasoning) {
  Prompt prompt = prompts::Inference();
  prompt.body += "\n\n" + TriggerSection(trigger) + "\n\n" + reasoning.raw;
  return prompt;
}

Prompt ConstructionRequestPrompt(const Prompt& construction, const Trigger& trigger,
                                 const Instruction& gold) {
  return Prompt{RenderPrompt(construction) + "\n\n### Task\n" + TriggerSection(trigger) +
                    "\nCorrect instruction: " + gold.surface,
                std::nullopt};
}

Pipeline::Pipeline(std::shared_ptr<ModelBackend> backend, std::shared_ptr<const TrieStore> tries,
                   std::shared_ptr<TemplateLibrary> templates, PipelineOptions options)
    : backend_(std::move(backend)),
      tries_(std::move(tries)),
      templates_(std::move(templates)),
      options_(options) {
  if (!backend_ || !tries_ || !templates_) {
    throw Error(ErrorCode::kInvalidArgument, "pipeline needs a backend, a trie store and templates");
  }
}

std::shared_ptr<const InstructionTrie> Pipeline::trie() const {
  auto trie = tries_->snapshot();
  if (!trie) throw Error(ErrorCode::kPreconditionViolation, "no instruction trie has been built");
  return trie;
}

ReasoningTrace Pipeline::ConstructReasoningSample(const Prompt& construction,
                                                  const Trigger& trigger,
                                                  const Instruction& gold) const {
  return RunStage(PipelineStage::kConstruction, [&] {
    if (!construction.is_construction()) {
      throw Error(ErrorCode::kPreconditionViolation,
                  "construction prompt must carry in-context examples");
    }
    Validate(trigger);
    const auto snapshot = trie();
    const Instruction* known = snapshot->find_instruction(gold.id);
    if (!known || known->surface != gold.surface) {
      throw Error(ErrorCode::kPreconditionViolation,
                  "gold instruction '" + gold.id + "' is not in the instruction library");
    }
    BackendRequest request{ConstructionRequestPrompt(construction, trigger, *known), trigger,
                           BackendMode::kGenerateText, std::nullopt};
    return ParseReasoning(backend_->GenerateText(request));
  });
}

RecommendationResult Pipeline::Infer(const Trigger& trigger, const RetrievalConfig& cfg,
                                     std::size_t k) const {
  if (k < 1 || k > kMaxRecommendations) {
    throw Error(ErrorCode::kInvalidArgument, "k must be between 1 and 3");
  }
  cfg.Validate();
  Validate(trigger);
  const auto snapshot = trie();

  const ReasoningTrace initial = RunStage(PipelineStage::kInitialReasoning, [&] {
    BackendRequest request{InitialReasoningPrompt(trigger), trigger, BackendMode::kGenerateText,
                           std::nullopt};
    return ParseReasoning(backend_->GenerateText(request));
  });

  const auto match = RunStage(PipelineStage::kRetrieval, [&] {
    return templates_->Retrieve(initial, cfg, trigger.id);
  });

  ReasoningTrace reasoning = initial;
  if (match) {
    reasoning = RunStage(PipelineStage::kRefinement, [&] {
      BackendRequest request{RefinementPrompt(match->tmpl, trigger), trigger,
                             BackendMode::kGenerateText, std::nullopt};
      return ParseReasoning(backend_->GenerateText(request));
    });
  }

  const auto decoded = RunStage(PipelineStage::kDecode, [&] {
    const Scorer scorer = MakeBackendScorer(*backend_, DecodePrompt(trigger, reasoning), trigger,
                                            snapshot->vocab_size());
    return TopKDecode(*snapshot, scorer, k, options_.beam_width);
  });

  RecommendationResult result;
  result.trigger_id = trigger.id;
  result.reasoning = std::move(reasoning);
  if (match) result.template_used = match->tmpl.id;
  for (const DecodeResult& d : decoded) {
    result.instructions.push_back(d.instruction_id);
    result.scores.push_back(d.score);
  }
  const auto ids = snapshot->instruction_ids();
  RunStage(PipelineStage::kDecode, [&] { Validate(result, ids); });
  return result;
}

Json SftRecord(const SftSample& sample) {
  Json out;
  out["trigger"] = ToJson(sample.trigger);
  out["reasoning"] = sample.reasoning.raw;
  out["instruction"] = sample.instruction.surface;
  return out;
}

ExportReport ExportSftDataset(std::span<const SftSample> samples, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIOFailure, "cannot open '" + path.string() + "' for writing");
  ExportReport report;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const SftSample& sample = samples[i];
    try {
      Validate(sample.trigger);
      Validate(sample.reasoning);
      if (sample.instruction.surface.empty()) {
        throw Error(ErrorCode::kInvariantViolation, "empty instruction surface");
      }
    } catch (const Error& e) {
      report.skipped.push_back({i, e.what()});
      continue;
    }
    out << SftRecord(sample).dump() << '\n';
    ++report.written;
  }
  out.flush();
  if (!out) throw Error(ErrorCode::kIOFailure, "write to '" + path.string() + "' failed");
  return report;
}

}  // namespace mira
