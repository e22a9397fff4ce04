#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "mira/core_types.hpp"
#include "mira/embedding.hpp"
#include "mira/error.hpp"
#include "mira/model_backend.hpp"

namespace mira {

// Reusable reasoning pattern: name, tag keywords, application scenarios and
// ordered reasoning steps. `embedding` caches Embed(EmbeddingText(*this)).
struct Template {
  std::string id;
  std::string name;
  std::vector<std::string> tags;
  std::string scenarios;
  std::vector<std::string> steps;
  EmbeddingVector embedding;
};

// name, tags, scenarios and steps, one per line.
std::string EmbeddingText(const Template& tmpl);

// Fills in the embedding; throws InvariantViolation on an empty id, name or
// step list.
Template MakeTemplate(std::string id, std::string name, std::vector<std::string> tags,
                      std::string scenarios, std::vector<std::string> steps,
                      const Embedder& embedder);

// {id, name, tags, scenarios, steps}; embeddings are never persisted.
Json ToJson(const Template& tmpl);
Template TemplateFromJson(const Json& json, const Embedder& embedder);

// Similarities this close are rounding noise: retrieval treats them as ties
// and as meeting a threshold they fall short of by no more than this.
inline constexpr double kSimilarityTolerance = 1e-12;

struct RetrievalConfig {
  double delta = 0.6;          // retrieval threshold
  double novelty_delta = 0.5;  // insertion threshold

  // delta must lie in [0, 1]; novelty_delta in (0, 1).
  void Validate() const;
};

struct DistillationLogEntry {
  std::string trigger_id;
  ReasoningTrace reasoning;
  double best_similarity = 0.0;  // -infinity when the library was empty
  std::chrono::steady_clock::time_point timestamp;
};

Json ToJson(const DistillationLogEntry& entry);
DistillationLogEntry DistillationLogEntryFromJson(const Json& json);
// Appends one JSON line per entry. Throws IOFailure.
void AppendDistillationLog(const std::filesystem::path& path,
                           std::span<const DistillationLogEntry> entries);
std::vector<DistillationLogEntry> ReadDistillationLog(const std::filesystem::path& path);

struct RetrievalMatch {
  Template tmpl;
  double similarity = 0.0;
};

enum class NoveltyVerdict { kAdded, kRejected };

struct NoveltyDecision {
  NoveltyVerdict verdict;
  double max_similarity;  // -infinity against an empty library
};

struct NoveltyAuditRecord {
  std::string candidate_id;
  std::size_t library_size_before = 0;
  double max_prior_similarity = 0.0;
  double novelty_delta = 0.0;
  NoveltyVerdict verdict = NoveltyVerdict::kRejected;
};

// Read-mostly template store. Retrievals share the library; insertions take
// it exclusively. Retrieval never touches the templates themselves, only the
// distillation log.
class TemplateLibrary {
 public:
  explicit TemplateLibrary(std::shared_ptr<const Embedder> embedder);

  const Embedder& embedder() const { return *embedder_; }
  std::shared_ptr<const Embedder> shared_embedder() const { return embedder_; }

  // Unconditional insert used for seed libraries. Recomputes the embedding.
  // Throws DuplicateId.
  void Insert(Template tmpl);

  // Highest-similarity template if it reaches cfg.delta, lowest id on ties
  // (both up to kSimilarityTolerance).
  // A miss appends a distillation log entry for `trigger_id`. Embedder
  // failures surface as EmbeddingFailure.
  std::optional<RetrievalMatch> Retrieve(const ReasoningTrace& reasoning,
                                         const RetrievalConfig& cfg,
                                         std::string_view trigger_id = {});

  // Admits the candidate iff its highest similarity to the current library is
  // below cfg.novelty_delta. Every call is recorded in the audit log. Throws
  // DuplicateId.
  NoveltyDecision AddIfNovel(Template candidate, const RetrievalConfig& cfg);

  std::vector<Template> templates() const;
  std::size_t size() const;
  std::optional<Template> find(std::string_view id) const;

  std::vector<DistillationLogEntry> distillation_log() const;
  std::vector<DistillationLogEntry> TakeDistillationLog();
  std::vector<NoveltyAuditRecord> audit_log() const;

  // JSON array of templates in insertion order.
  Json ToJson() const;
  void LoadJson(const Json& json);

 private:
  std::shared_ptr<const Embedder> embedder_;
  mutable std::shared_mutex library_mutex_;
  std::vector<Template> templates_;
  std::vector<NoveltyAuditRecord> audit_;
  mutable std::mutex log_mutex_;
  std::vector<DistillationLogEntry> log_;
};

struct ClusterFailure {
  std::size_t cluster_index = 0;
  ErrorCode code = ErrorCode::kSummarizerFailure;
  std::string message;
};

struct DistillationReport {
  std::vector<std::vector<std::size_t>> clusters;  // log indices, ascending
  std::vector<Template> candidates;
  std::vector<ClusterFailure> failures;
};

struct DistillationOptions {
  std::size_t min_cluster = 2;
  double link_threshold = 0.7;
};

// Stage texts of a trace, one per line, without delimiters or stage labels.
std::string ReasoningContent(const ReasoningTrace& reasoning);

// Single-linkage clustering of the logged reasoning content (entries linked
// when their embeddings reach `link_threshold`), then one summarizer call per
// cluster of at least `min_cluster` entries using the cluster medoid. The
// summarizer must answer with a JSON object {name, tags, scenarios, steps}.
// Failing clusters are skipped and reported. Candidates are not inserted.
DistillationReport DistillCandidates(std::span<const DistillationLogEntry> log,
                                     ModelBackend& summarizer, const Embedder& embedder,
                                     const DistillationOptions& options = {});

}  // namespace mira
