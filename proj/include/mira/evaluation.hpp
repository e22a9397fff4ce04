#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mira/core_types.hpp"
#include "mira/pipeline.hpp"
#include "mira/template_library.hpp"

namespace mira {

struct EvalSample {
  Trigger trigger;
  std::string gold;  // instruction id
};

// Eval set JSONL: {"trigger": {...}, "gold": str} per line.
std::vector<EvalSample> LoadEvalSet(const std::filesystem::path& path);
Json ToJson(const EvalSample& sample);

struct Metrics {
  double recall = 0.0;
  double precision = 0.0;
  double macro_f1 = 0.0;
  std::vector<std::pair<std::size_t, double>> hit_rate;  // (k, HR@k), ascending k

  // Throws InvalidArgument if k was not computed.
  double hr(std::size_t k) const;
};

// Precision, recall and F1 treat each sample's first prediction as a
// single-label classification and are macro-averaged over the classes that
// occur in `golds`. A class never predicted gets precision 0 and any 0/0 term
// contributes 0. HR@k is the fraction of samples whose gold is among the
// first k predictions. An empty prediction list is a miss.
//
// Throws LengthMismatch and, when `library_ids` is non-empty,
// UnknownInstructionId.
Metrics ComputeMetrics(std::span<const std::vector<std::string>> predictions,
                       std::span<const std::string> golds, std::span<const std::size_t> k_values,
                       std::span<const std::string> library_ids = {});

// {"recall", "precision", "macro_f1", "hr@k"...} in that order.
Json ToJson(const Metrics& metrics);

struct SampleFailure {
  std::string trigger_id;
  std::string message;
};

struct EvaluationRun {
  std::vector<std::vector<std::string>> predictions;  // empty list for failed samples
  std::vector<SampleFailure> failures;
  Metrics metrics;
};

// Runs Infer on every sample. Failed samples count as misses and are listed.
EvaluationRun Evaluate(const Pipeline& pipeline, std::span<const EvalSample> samples,
                       const RetrievalConfig& cfg, std::size_t k);

struct SweepRow {
  double delta = 0.0;
  Metrics metrics;
  std::vector<SampleFailure> failures;
  bool partial() const { return !failures.empty(); }
};

// One Evaluate pass per delta (the novelty threshold is taken from `base`).
std::vector<SweepRow> DeltaSweep(const Pipeline& pipeline, std::span<const EvalSample> samples,
                                 std::span<const double> deltas, std::size_t k,
                                 const RetrievalConfig& base = {});

// Header "delta,recall,precision,macro_f1,hr1,hr3".
std::string SweepCsv(std::span<const SweepRow> rows);
Json ToJson(std::span<const SweepRow> rows);

}  // namespace mira
