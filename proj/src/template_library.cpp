#include "mira/template_library.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

namespace mira {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

constexpr std::string_view kDistillPrompt =
    "You maintain a library of reusable reasoning templates for recommending smartphone AI "
    "task instructions. The reasoning trace below is representative of a group of requests "
    "that no existing template covers. Summarize it into a general template and answer with "
    "a single JSON object: {\"name\": string, \"tags\": [string], \"scenarios\": string, "
    "\"steps\": [string]}.";

EmbeddingVector EmbedOrFail(const Embedder& embedder, std::string_view text) {
  try {
    return embedder.Embed(text);
  } catch (const Error& e) {
    throw Error(ErrorCode::kEmbeddingFailure, std::string(ToString(e.code())) + ": " + e.detail());
  } catch (const std::exception& e) {
    throw Error(ErrorCode::kEmbeddingFailure, e.what());
  }
}

void CheckTemplate(const Template& tmpl) {
  if (tmpl.id.empty()) throw Error(ErrorCode::kInvariantViolation, "template id is empty");
  if (tmpl.name.empty()) {
    throw Error(ErrorCode::kInvariantViolation, "template '" + tmpl.id + "' has no name");
  }
  if (tmpl.steps.empty()) {
    throw Error(ErrorCode::kInvariantViolation, "template '" + tmpl.id + "' has no steps");
  }
}

std::string Hex64(std::uint64_t value) {
  char buffer[17];
  std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(value));
  return buffer;
}

// Strips prose around the first {...} block of a model answer.
Json ParseTemplateAnswer(const std::string& text) {
  const auto open = text.find('{');
  const auto close = text.rfind('}');
  if (open == std::string::npos || close == std::string::npos || close < open) {
    throw Error(ErrorCode::kMalformedTemplateResponse, "no JSON object in summarizer answer");
  }
  try {
    return Json::parse(text.substr(open, close - open + 1));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kMalformedTemplateResponse, e.what());
  }
}

class DisjointSets {
 public:
  explicit DisjointSets(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace

std::string EmbeddingText(const Template& tmpl) {
  std::string text = tmpl.name;
  for (const std::string& tag : tmpl.tags) text += "\n" + tag;
  text += "\n" + tmpl.scenarios;
  for (const std::string& step : tmpl.steps) text += "\n" + step;
  return text;
}

std::string ReasoningContent(const ReasoningTrace& reasoning) {
  std::string text;
  for (const ReasoningStep& step : reasoning.steps) {
    if (!text.empty()) text += '\n';
    text += step.text;
  }
  return text;
}

Template MakeTemplate(std::string id, std::string name, std::vector<std::string> tags,
                      std::string scenarios, std::vector<std::string> steps,
                      const Embedder& embedder) {
  Template tmpl{std::move(id), std::move(name), std::move(tags), std::move(scenarios),
                std::move(steps), {}};
  CheckTemplate(tmpl);
  tmpl.embedding = EmbedOrFail(embedder, EmbeddingText(tmpl));
  return tmpl;
}

Json ToJson(const Template& tmpl) {
  Json out;
  out["id"] = tmpl.id;
  out["name"] = tmpl.name;
  out["tags"] = tmpl.tags;
  out["scenarios"] = tmpl.scenarios;
  out["steps"] = tmpl.steps;
  return out;
}

Template TemplateFromJson(const Json& json, const Embedder& embedder) {
  try {
    return MakeTemplate(json.at("id").get<std::string>(), json.at("name").get<std::string>(),
                        json.value("tags", std::vector<std::string>{}),
                        json.value("scenarios", std::string{}),
                        json.at("steps").get<std::vector<std::string>>(), embedder);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kInvariantViolation, std::string("bad template JSON: ") + e.what());
  }
}

void RetrievalConfig::Validate() const {
  if (!(delta >= 0.0 && delta <= 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "delta must lie in [0, 1]");
  }
  if (!(novelty_delta > 0.0 && novelty_delta < 1.0)) {
    throw Error(ErrorCode::kInvalidArgument, "novelty_delta must lie in (0, 1)");
  }
}

Json ToJson(const DistillationLogEntry& entry) {
  Json out;
  out["trigger_id"] = entry.trigger_id;
  out["reasoning"] = entry.reasoning.raw;
  out["best_similarity"] =
      std::isfinite(entry.best_similarity) ? Json(entry.best_similarity) : Json(nullptr);
  out["timestamp_ns"] =
      std::chrono::duration_cast<std::chrono::nanoseconds>(entry.timestamp.time_since_epoch())
          .count();
  return out;
}

DistillationLogEntry DistillationLogEntryFromJson(const Json& json) {
  DistillationLogEntry entry;
  try {
    entry.trigger_id = json.at("trigger_id").get<std::string>();
    entry.reasoning = ReasoningTraceFromJson(json.at("reasoning"));
    const Json& best = json.at("best_similarity");
    entry.best_similarity = best.is_null() ? kNegInf : best.get<double>();
    entry.timestamp = std::chrono::steady_clock::time_point(
        std::chrono::nanoseconds(json.value("timestamp_ns", std::int64_t{0})));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kInvariantViolation, std::string("bad log entry: ") + e.what());
  }
  return entry;
}

void AppendDistillationLog(const std::filesystem::path& path,
                           std::span<const DistillationLogEntry> entries) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw Error(ErrorCode::kIOFailure, "cannot open '" + path.string() + "'");
  for (const DistillationLogEntry& entry : entries) out << ToJson(entry).dump() << '\n';
  if (!out) throw Error(ErrorCode::kIOFailure, "write to '" + path.string() + "' failed");
}

std::vector<DistillationLogEntry> ReadDistillationLog(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIOFailure, "cannot open '" + path.string() + "'");
  std::vector<DistillationLogEntry> entries;
  std::string line;
  while (std::getline(in, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      entries.push_back(DistillationLogEntryFromJson(Json::parse(line)));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kInvariantViolation, std::string("bad log line: ") + e.what());
    }
  }
  return entries;
}

TemplateLibrary::TemplateLibrary(std::shared_ptr<const Embedder> embedder)
    : embedder_(std::move(embedder)) {
  if (!embedder_) throw Error(ErrorCode::kInvalidArgument, "null embedder");
}

void TemplateLibrary::Insert(Template tmpl) {
  CheckTemplate(tmpl);
  tmpl.embedding = EmbedOrFail(*embedder_, EmbeddingText(tmpl));
  std::unique_lock lock(library_mutex_);
  for (const Template& existing : templates_) {
    if (existing.id == tmpl.id) throw Error(ErrorCode::kDuplicateId, "template '" + tmpl.id + "'");
  }
  templates_.push_back(std::move(tmpl));
}

std::optional<RetrievalMatch> TemplateLibrary::Retrieve(const ReasoningTrace& reasoning,
                                                        const RetrievalConfig& cfg,
                                                        std::string_view trigger_id) {
  const EmbeddingVector query = EmbedOrFail(*embedder_, reasoning.raw);
  double best = kNegInf;
  const Template* winner = nullptr;
  std::shared_lock lock(library_mutex_);
  for (const Template& tmpl : templates_) {
    const double similarity = CosineSimilarity(query, tmpl.embedding);
    const bool tied = std::abs(similarity - best) <= kSimilarityTolerance;
    if (!winner || (similarity > best && !tied) || (tied && tmpl.id < winner->id)) {
      best = similarity;
      winner = &tmpl;
    }
  }
  if (winner && best >= cfg.delta - kSimilarityTolerance) return RetrievalMatch{*winner, best};
  lock.unlock();

  std::lock_guard log_lock(log_mutex_);
  log_.push_back({std::string(trigger_id), reasoning, best, std::chrono::steady_clock::now()});
  return std::nullopt;
}

NoveltyDecision TemplateLibrary::AddIfNovel(Template candidate, const RetrievalConfig& cfg) {
  CheckTemplate(candidate);
  candidate.embedding = EmbedOrFail(*embedder_, EmbeddingText(candidate));
  std::unique_lock lock(library_mutex_);
  double max_similarity = kNegInf;
  for (const Template& existing : templates_) {
    if (existing.id == candidate.id) {
      throw Error(ErrorCode::kDuplicateId, "template '" + candidate.id + "'");
    }
    max_similarity = std::max(max_similarity, CosineSimilarity(candidate.embedding, existing.embedding));
  }
  const NoveltyVerdict verdict =
      max_similarity < cfg.novelty_delta ? NoveltyVerdict::kAdded : NoveltyVerdict::kRejected;
  audit_.push_back({candidate.id, templates_.size(), max_similarity, cfg.novelty_delta, verdict});
  if (verdict == NoveltyVerdict::kAdded) templates_.push_back(std::move(candidate));
  return {verdict, max_similarity};
}

std::vector<Template> TemplateLibrary::templates() const {
  std::shared_lock lock(library_mutex_);
  return templates_;
}

std::size_t TemplateLibrary::size() const {
  std::shared_lock lock(library_mutex_);
  return templates_.size();
}

std::optional<Template> TemplateLibrary::find(std::string_view id) const {
  std::shared_lock lock(library_mutex_);
  for (const Template& tmpl : templates_) {
    if (tmpl.id == id) return tmpl;
  }
  return std::nullopt;
}

std::vector<DistillationLogEntry> TemplateLibrary::distillation_log() const {
  std::lock_guard lock(log_mutex_);
  return log_;
}

std::vector<DistillationLogEntry> TemplateLibrary::TakeDistillationLog() {
  std::lock_guard lock(log_mutex_);
  return std::exchange(log_, {});
}

std::vector<NoveltyAuditRecord> TemplateLibrary::audit_log() const {
  std::shared_lock lock(library_mutex_);
  return audit_;
}

Json TemplateLibrary::ToJson() const {
  std::shared_lock lock(library_mutex_);
  Json out = Json::array();
  for (const Template& tmpl : templates_) out.push_back(mira::ToJson(tmpl));
  return out;
}

void TemplateLibrary::LoadJson(const Json& json) {
  if (!json.is_array()) throw Error(ErrorCode::kInvariantViolation, "template library must be an array");
  for (const Json& item : json) Insert(TemplateFromJson(item, *embedder_));
}

DistillationReport DistillCandidates(std::span<const DistillationLogEntry> log,
                                     ModelBackend& summarizer, const Embedder& embedder,
                                     const DistillationOptions& options) {
  if (options.min_cluster < 1) throw Error(ErrorCode::kInvalidArgument, "min_cluster must be >= 1");
  DistillationReport report;
  if (log.empty()) return report;

  std::vector<EmbeddingVector> vectors;
  vectors.reserve(log.size());
  for (const DistillationLogEntry& entry : log) {
    vectors.push_back(EmbedOrFail(embedder, ReasoningContent(entry.reasoning)));
  }
  const std::size_t n = log.size();
  std::vector<std::vector<double>> similarity(n, std::vector<double>(n, 1.0));
  DisjointSets sets(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      similarity[i][j] = similarity[j][i] = CosineSimilarity(vectors[i], vectors[j]);
      if (similarity[i][j] >= options.link_threshold) sets.unite(i, j);
    }
  }
  // Roots are the smallest member, so clusters come out ordered by first entry.
  std::vector<std::vector<std::size_t>> by_root(n);
  for (std::size_t i = 0; i < n; ++i) by_root[sets.find(i)].push_back(i);
  for (auto& members : by_root) {
    if (!members.empty()) report.clusters.push_back(std::move(members));
  }

  for (std::size_t c = 0; c < report.clusters.size(); ++c) {
    const auto& members = report.clusters[c];
    if (members.size() < options.min_cluster) continue;

    std::size_t medoid = members.front();
    double best_total = kNegInf;
    for (std::size_t i : members) {
      double total = 0.0;
      for (std::size_t j : members) {
        if (i != j) total += similarity[i][j];
      }
      if (total > best_total) {
        best_total = total;
        medoid = i;
      }
    }

    const DistillationLogEntry& representative = log[medoid];
    BackendRequest request;
    request.prompt.body = std::string(kDistillPrompt) + "\n\nCluster size: " +
                          std::to_string(members.size()) + "\n\n" + representative.reasoning.raw;
    request.trigger.id = representative.trigger_id.empty() ? "distillation" : representative.trigger_id;
    request.trigger.modality = Modality::kText;
    request.trigger.text = representative.reasoning.raw;
    request.mode = BackendMode::kGenerateText;

    std::string answer;
    try {
      answer = summarizer.GenerateText(request);
    } catch (const Error& e) {
      report.failures.push_back({c, ErrorCode::kSummarizerFailure,
                                 std::string(ToString(e.code())) + ": " + e.detail()});
      continue;
    } catch (const std::exception& e) {
      report.failures.push_back({c, ErrorCode::kSummarizerFailure, e.what()});
      continue;
    }

    try {
      const Json parsed = ParseTemplateAnswer(answer);
      if (!parsed.is_object()) {
        throw Error(ErrorCode::kMalformedTemplateResponse, "answer is not a JSON object");
      }
      Json with_id = parsed;
      with_id["id"] = "distilled-" + Hex64(Fnv1a64(parsed.dump()));
      report.candidates.push_back(TemplateFromJson(with_id, embedder));
    } catch (const Error& e) {
      report.failures.push_back({c, ErrorCode::kMalformedTemplateResponse, e.detail()});
    } catch (const Json::exception& e) {
      report.failures.push_back({c, ErrorCode::kMalformedTemplateResponse, e.what()});
    }
  }
  return report;
}

}  // namespace mira
