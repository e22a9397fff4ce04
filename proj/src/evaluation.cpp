#include "mira/evaluation.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "mira/error.hpp"

namespace mira {

namespace {

double Ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::string FormatNumber(double value) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed << value;
  return out.str();
}

}  // namespace

std::vector<EvalSample> LoadEvalSet(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIOFailure, "cannot open '" + path.string() + "'");
  std::vector<EvalSample> samples;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const Json json = Json::parse(line);
      samples.push_back({TriggerFromJson(json.at("trigger")), json.at("gold").get<std::string>()});
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::kInvariantViolation,
                  path.string() + ":" + std::to_string(line_number) + ": " + e.what());
    }
  }
  return samples;
}

Json ToJson(const EvalSample& sample) {
  Json out;
  out["trigger"] = ToJson(sample.trigger);
  out["gold"] = sample.gold;
  return out;
}

double Metrics::hr(std::size_t k) const {
  for (const auto& [kk, value] : hit_rate) {
    if (kk == k) return value;
  }
  throw Error(ErrorCode::kInvalidArgument, "HR@" + std::to_string(k) + " was not computed");
}

Metrics ComputeMetrics(std::span<const std::vector<std::string>> predictions,
                       std::span<const std::string> golds, std::span<const std::size_t> k_values,
                       std::span<const std::string> library_ids) {
  if (predictions.size() != golds.size()) {
    throw Error(ErrorCode::kLengthMismatch, std::to_string(predictions.size()) + " predictions for " +
                                                std::to_string(golds.size()) + " golds");
  }
  if (!library_ids.empty()) {
    const std::set<std::string> known(library_ids.begin(), library_ids.end());
    const auto check = [&](const std::string& id) {
      if (!known.contains(id)) throw Error(ErrorCode::kUnknownInstructionId, id);
    };
    for (const std::string& gold : golds) check(gold);
    for (const auto& list : predictions) std::for_each(list.begin(), list.end(), check);
  }

  struct Counts {
    std::size_t true_positive = 0;
    std::size_t predicted = 0;
    std::size_t actual = 0;
  };
  std::map<std::string, Counts> classes;
  for (const std::string& gold : golds) ++classes[gold].actual;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    if (predictions[i].empty()) continue;
    const std::string& top = predictions[i].front();
    if (auto it = classes.find(top); it != classes.end()) {
      ++it->second.predicted;
      if (top == golds[i]) ++it->second.true_positive;
    }
  }

  Metrics metrics;
  if (!classes.empty()) {
    double precision = 0.0, recall = 0.0, f1 = 0.0;
    for (const auto& [id, c] : classes) {
      const double p = Ratio(c.true_positive, c.predicted);
      const double r = Ratio(c.true_positive, c.actual);
      precision += p;
      recall += r;
      f1 += (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
    }
    const auto n = static_cast<double>(classes.size());
    metrics.precision = precision / n;
    metrics.recall = recall / n;
    metrics.macro_f1 = f1 / n;
  }

  std::vector<std::size_t> ks(k_values.begin(), k_values.end());
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  for (std::size_t k : ks) {
    if (k == 0) throw Error(ErrorCode::kInvalidArgument, "HR@0 is undefined");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < golds.size(); ++i) {
      const auto& list = predictions[i];
      const auto end = list.begin() + static_cast<std::ptrdiff_t>(std::min(k, list.size()));
      if (std::find(list.begin(), end, golds[i]) != end) ++hits;
    }
    metrics.hit_rate.emplace_back(k, Ratio(hits, golds.size()));
  }
  return metrics;
}

Json ToJson(const Metrics& metrics) {
  Json out;
  out["recall"] = metrics.recall;
  out["precision"] = metrics.precision;
  out["macro_f1"] = metrics.macro_f1;
  for (const auto& [k, value] : metrics.hit_rate) out["hr@" + std::to_string(k)] = value;
  return out;
}

EvaluationRun Evaluate(const Pipeline& pipeline, std::span<const EvalSample> samples,
                       const RetrievalConfig& cfg, std::size_t k) {
  EvaluationRun run;
  std::vector<std::string> golds;
  run.predictions.reserve(samples.size());
  for (const EvalSample& sample : samples) {
    golds.push_back(sample.gold);
    try {
      run.predictions.push_back(pipeline.Infer(sample.trigger, cfg, k).instructions);
    } catch (const Error& e) {
      run.predictions.emplace_back();
      run.failures.push_back({sample.trigger.id, e.what()});
    }
  }
  const std::size_t ks[] = {1, 3};
  run.metrics = ComputeMetrics(run.predictions, golds, ks, pipeline.trie()->instruction_ids());
  return run;
}

std::vector<SweepRow> DeltaSweep(const Pipeline& pipeline, std::span<const EvalSample> samples,
                                 std::span<const double> deltas, std::size_t k,
                                 const RetrievalConfig& base) {
  std::vector<SweepRow> rows;
  rows.reserve(deltas.size());
  for (double delta : deltas) {
    RetrievalConfig cfg = base;
    cfg.delta = delta;
    cfg.Validate();
    EvaluationRun run = Evaluate(pipeline, samples, cfg, k);
    rows.push_back({delta, std::move(run.metrics), std::move(run.failures)});
  }
  return rows;
}

std::string SweepCsv(std::span<const SweepRow> rows) {
  std::string csv = "delta,recall,precision,macro_f1,hr1,hr3\n";
  for (const SweepRow& row : rows) {
    csv += FormatNumber(row.delta) + "," + FormatNumber(row.metrics.recall) + "," +
           FormatNumber(row.metrics.precision) + "," + FormatNumber(row.metrics.macro_f1) + "," +
           FormatNumber(row.metrics.hr(1)) + "," + FormatNumber(row.metrics.hr(3)) + "\n";
  }
  return csv;
}

Json ToJson(std::span<const SweepRow> rows) {
  Json out = Json::array();
  for (const SweepRow& row : rows) {
    Json item;
    item["delta"] = row.delta;
    item["metrics"] = ToJson(row.metrics);
    item["partial"] = row.partial();
    item["failures"] = Json::array();
    for (const SampleFailure& f : row.failures) {
      item["failures"].push_back(Json{{"trigger_id", f.trigger_id}, {"message", f.message}});
    }
    out.push_back(std::move(item));
  }
  return out;
}

}  // namespace mira
