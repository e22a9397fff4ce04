#include "cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mira/core_types.hpp"
#include "mira/embedding.hpp"
#include "mira/error.hpp"
#include "mira/evaluation.hpp"
#include "mira/instruction_trie.hpp"
#include "mira/model_backend.hpp"
#include "mira/pipeline.hpp"
#include "mira/prompts.hpp"
#include "mira/template_library.hpp"
#include "mira/tokenizer.hpp"

namespace mira::cli {

namespace fs = std::filesystem;

namespace {

Json ReadJsonFile(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIOFailure, "cannot open '" + path.string() + "'");
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::kInvariantViolation, path.string() + ": " + e.what());
  }
}

void WriteTextFile(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIOFailure, "cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw Error(ErrorCode::kIOFailure, "write to '" + path.string() + "' failed");
}

std::vector<Instruction> LoadInstructions(const fs::path& path) {
  const Json json = ReadJsonFile(path);
  if (!json.is_array()) {
    throw Error(ErrorCode::kInvariantViolation, path.string() + ": expected a JSON array");
  }
  std::vector<Instruction> library;
  for (const Json& item : json) library.push_back(InstructionFromJson(item));
  return library;
}

struct BackendSettings {
  std::string kind = "mock";
  std::optional<fs::path> mock_script;
  std::string endpoint;
  std::chrono::milliseconds timeout{30000};
};

// Paths inside the config resolve against the config file's directory.
struct Config {
  RetrievalConfig retrieval;
  std::size_t beam_width = 0;
  std::optional<fs::path> instructions;
  std::optional<fs::path> vocabulary;
  std::optional<fs::path> templates;
  std::optional<fs::path> distillation_log;
  BackendSettings backend;
};

Config LoadConfig(const fs::path& path) {
  const Json json = ReadJsonFile(path);
  const fs::path base = path.parent_path();
  const auto resolve = [&](const Json& value) { return base / value.get<std::string>(); };
  Config cfg;
  try {
    cfg.retrieval.delta = json.value("delta", cfg.retrieval.delta);
    cfg.retrieval.novelty_delta = json.value("novelty_delta", cfg.retrieval.novelty_delta);
    cfg.beam_width = json.value("beam_width", std::size_t{0});
    if (json.contains("instructions")) cfg.instructions = resolve(json["instructions"]);
    if (json.contains("vocabulary")) cfg.vocabulary = resolve(json["vocabulary"]);
    if (json.contains("templates")) cfg.templates = resolve(json["templates"]);
    if (json.contains("distillation_log")) cfg.distillation_log = resolve(json["distillation_log"]);
    if (json.contains("backend")) {
      const Json& b = json["backend"];
      cfg.backend.kind = b.value("kind", cfg.backend.kind);
      if (b.contains("mock_script")) cfg.backend.mock_script = resolve(b["mock_script"]);
      cfg.backend.endpoint = b.value("endpoint", std::string{});
      cfg.backend.timeout = std::chrono::milliseconds(b.value("timeout_ms", 30000));
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::kInvariantViolation, path.string() + ": " + e.what());
  }
  return cfg;
}

std::shared_ptr<ModelBackend> MakeBackend(const BackendSettings& settings) {
  if (settings.kind == "mock") {
    if (!settings.mock_script) {
      throw Error(ErrorCode::kInvalidArgument, "mock backend needs a mock script");
    }
    return std::make_shared<MockBackend>(MockScript::FromJson(ReadJsonFile(*settings.mock_script)));
  }
  if (settings.kind == "http") {
    if (settings.endpoint.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "http backend needs an endpoint");
    }
    return std::make_shared<HttpBackend>(HttpBackendOptions{settings.endpoint, settings.timeout});
  }
  throw Error(ErrorCode::kInvalidArgument, "unknown backend '" + settings.kind + "'");
}

std::shared_ptr<TemplateLibrary> LoadTemplates(const Config& cfg, bool allow_missing) {
  auto library = std::make_shared<TemplateLibrary>(std::make_shared<HashingEmbedder>());
  if (!cfg.templates) return library;
  if (allow_missing && !fs::exists(*cfg.templates)) return library;
  library->LoadJson(ReadJsonFile(*cfg.templates));
  return library;
}

void SaveTemplates(const Config& cfg, const TemplateLibrary& library) {
  if (!cfg.templates) {
    throw Error(ErrorCode::kInvalidArgument, "config has no templates path to write to");
  }
  WriteTextFile(*cfg.templates, library.ToJson().dump(2) + "\n");
}

std::shared_ptr<TrieStore> LoadTrie(const Config& cfg) {
  if (!cfg.instructions) throw Error(ErrorCode::kInvalidArgument, "config has no instructions path");
  std::vector<Instruction> library = LoadInstructions(*cfg.instructions);
  auto vocab = std::make_shared<const Vocabulary>(
      cfg.vocabulary ? VocabularyFromJson(ReadJsonFile(*cfg.vocabulary)) : BuildVocabulary(library));
  auto store = std::make_shared<TrieStore>();
  store->Rebuild(std::move(library), std::move(vocab));
  return store;
}

Json LibrarySummary(const TemplateLibrary& library) {
  Json ids = Json::array();
  for (const Template& tmpl : library.templates()) ids.push_back(tmpl.id);
  return Json{{"size", library.size()}, {"ids", std::move(ids)}};
}

std::string_view VerdictName(NoveltyVerdict verdict) {
  return verdict == NoveltyVerdict::kAdded ? "Added" : "Rejected";
}

Json Similarity(double value) { return std::isfinite(value) ? Json(value) : Json(nullptr); }

Json AddCandidate(TemplateLibrary& library, Template candidate, const RetrievalConfig& cfg) {
  Json row;
  row["id"] = candidate.id;
  try {
    const NoveltyDecision decision = library.AddIfNovel(std::move(candidate), cfg);
    row["verdict"] = VerdictName(decision.verdict);
    row["max_similarity"] = Similarity(decision.max_similarity);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kDuplicateId) throw;
    row["verdict"] = "Rejected";
    row["reason"] = e.what();
  }
  return row;
}

void Print(std::ostream& out, const Json& json) { out << json.dump(2) << '\n'; }

// --- commands --------------------------------------------------------------

struct BuildTrieArgs {
  std::string instructions;
  std::string out;
  std::string vocab_out;
};

void BuildTrieCommand(const BuildTrieArgs& args, std::ostream& out) {
  std::vector<Instruction> library = LoadInstructions(args.instructions);
  auto vocab = std::make_shared<const Vocabulary>(BuildVocabulary(library));
  const InstructionTrie trie = InstructionTrie::Build(std::move(library), vocab);
  WriteTextFile(args.out, trie.debug_dump().dump(2) + "\n");
  if (!args.vocab_out.empty()) WriteTextFile(args.vocab_out, ToJson(*vocab).dump(2) + "\n");
  Print(out, Json{{"instructions", trie.instructions().size()},
                  {"vocab_size", trie.vocab_size()},
                  {"nodes", trie.node_count()},
                  {"terminals", trie.terminal_count()},
                  {"root_children", trie.root().valid().size()}});
}

struct CommonArgs {
  std::string config;
  std::string backend;
  std::string mock_script;
  std::string endpoint;
  std::optional<double> delta;
};

Config ResolveConfig(const CommonArgs& args) {
  Config cfg = LoadConfig(args.config);
  if (!args.backend.empty()) cfg.backend.kind = args.backend;
  if (!args.mock_script.empty()) cfg.backend.mock_script = fs::path(args.mock_script);
  if (!args.endpoint.empty()) cfg.backend.endpoint = args.endpoint;
  if (args.delta) cfg.retrieval.delta = *args.delta;
  cfg.retrieval.Validate();
  return cfg;
}

Pipeline MakePipeline(const Config& cfg) {
  return Pipeline(MakeBackend(cfg.backend), LoadTrie(cfg), LoadTemplates(cfg, false),
                  PipelineOptions{cfg.beam_width});
}

void FlushDistillationLog(const Config& cfg, TemplateLibrary& library) {
  const auto entries = library.TakeDistillationLog();
  if (cfg.distillation_log && !entries.empty()) AppendDistillationLog(*cfg.distillation_log, entries);
}

struct RecommendArgs {
  CommonArgs common;
  std::string trigger;
  std::size_t k = 3;
};

void RecommendCommand(const RecommendArgs& args, std::ostream& out) {
  const Config cfg = ResolveConfig(args.common);
  const Trigger trigger = TriggerFromJson(ReadJsonFile(args.trigger));
  const Pipeline pipeline = MakePipeline(cfg);
  const RecommendationResult result = pipeline.Infer(trigger, cfg.retrieval, args.k);
  FlushDistillationLog(cfg, pipeline.templates());
  Print(out, ToJson(result));
}

void TemplateListCommand(const CommonArgs& args, std::ostream& out) {
  const Config cfg = ResolveConfig(args);
  Print(out, LoadTemplates(cfg, true)->ToJson());
}

struct TemplateAddArgs {
  CommonArgs common;
  std::string file;
};

void TemplateAddCommand(const TemplateAddArgs& args, std::ostream& out) {
  const Config cfg = ResolveConfig(args.common);
  auto library = LoadTemplates(cfg, true);
  Json input = ReadJsonFile(args.file);
  if (!input.is_array()) input = Json::array({input});

  Json report;
  report["before"] = LibrarySummary(*library);
  report["candidates"] = Json::array();
  for (const Json& item : input) {
    report["candidates"].push_back(
        AddCandidate(*library, TemplateFromJson(item, library->embedder()), cfg.retrieval));
  }
  SaveTemplates(cfg, *library);
  report["after"] = LibrarySummary(*library);
  Print(out, report);
}

struct DistillArgs {
  CommonArgs common;
  std::size_t min_cluster = 2;
  double link_threshold = 0.7;
};

void TemplateDistillCommand(const DistillArgs& args, std::ostream& out) {
  const Config cfg = ResolveConfig(args.common);
  if (!cfg.distillation_log) {
    throw Error(ErrorCode::kInvalidArgument, "config has no distillation_log path");
  }
  auto library = LoadTemplates(cfg, true);
  const auto log = fs::exists(*cfg.distillation_log) ? ReadDistillationLog(*cfg.distillation_log)
                                                     : std::vector<DistillationLogEntry>{};
  const auto backend = MakeBackend(cfg.backend);
  const DistillationReport distilled = DistillCandidates(
      log, *backend, library->embedder(), DistillationOptions{args.min_cluster, args.link_threshold});

  Json report;
  report["before"] = LibrarySummary(*library);
  report["log_entries"] = log.size();
  report["clusters"] = distilled.clusters;
  report["candidates"] = Json::array();
  for (const Template& candidate : distilled.candidates) {
    Json row = AddCandidate(*library, candidate, cfg.retrieval);
    row["template"] = ToJson(candidate);
    report["candidates"].push_back(std::move(row));
  }
  report["failures"] = Json::array();
  for (const ClusterFailure& f : distilled.failures) {
    report["failures"].push_back(Json{{"cluster", f.cluster_index},
                                      {"code", ToString(f.code)},
                                      {"message", f.message}});
  }
  SaveTemplates(cfg, *library);
  report["after"] = LibrarySummary(*library);
  Print(out, report);
}

struct ConstructArgs {
  CommonArgs common;
  std::string pairs;
  std::string out;
};

void ConstructDatasetCommand(const ConstructArgs& args, std::ostream& out, std::ostream& err) {
  const Config cfg = ResolveConfig(args.common);
  const Pipeline pipeline = MakePipeline(cfg);
  const auto trie = pipeline.trie();
  const Prompt construction = prompts::Construction();
  const std::vector<EvalSample> pairs = LoadEvalSet(args.pairs);

  std::vector<SftSample> samples;
  Json failed = Json::array();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const Instruction* gold = trie->find_instruction(pairs[i].gold);
    try {
      if (!gold) throw Error(ErrorCode::kUnknownInstructionId, pairs[i].gold);
      samples.push_back({pairs[i].trigger, *gold,
                         pipeline.ConstructReasoningSample(construction, pairs[i].trigger, *gold)});
    } catch (const Error& e) {
      err << "pair " << i << " (" << pairs[i].trigger.id << "): " << e.what() << '\n';
      failed.push_back(Json{{"index", i}, {"reason", e.what()}});
    }
  }
  const ExportReport exported = ExportSftDataset(samples, args.out);
  Json skipped = Json::array();
  for (const SkippedSample& s : exported.skipped) {
    skipped.push_back(Json{{"index", s.index}, {"reason", s.reason}});
  }
  Print(out, Json{{"pairs", pairs.size()},
                  {"written", exported.written},
                  {"construction_failures", std::move(failed)},
                  {"export_skipped", std::move(skipped)}});
}

struct EvalArgs {
  CommonArgs common;
  std::string testset;
  std::vector<double> sweep_deltas;
  std::size_t k = 3;
};

void EvalCommand(const EvalArgs& args, std::ostream& out, std::ostream& err) {
  const Config cfg = ResolveConfig(args.common);
  const Pipeline pipeline = MakePipeline(cfg);
  const std::vector<EvalSample> samples = LoadEvalSet(args.testset);

  const bool sweep = !args.sweep_deltas.empty();
  const std::vector<double> deltas = sweep ? args.sweep_deltas : std::vector<double>{cfg.retrieval.delta};
  const std::vector<SweepRow> rows = DeltaSweep(pipeline, samples, deltas, args.k, cfg.retrieval);
  for (const SweepRow& row : rows) {
    for (const SampleFailure& f : row.failures) {
      err << "delta " << row.delta << ", sample " << f.trigger_id << ": " << f.message << '\n';
    }
    if (row.partial()) err << "delta " << row.delta << ": partial (" << row.failures.size() << " failed)\n";
  }
  if (sweep) {
    out << SweepCsv(rows);
    return;
  }
  Json result = ToJson(rows.front().metrics);
  result["delta"] = rows.front().delta;
  result["samples"] = samples.size();
  result["partial"] = rows.front().partial();
  Print(out, result);
}

void AddCommonOptions(CLI::App& cmd, CommonArgs& args) {
  cmd.add_option("--config", args.config, "Config JSON")->required()->check(CLI::ExistingFile);
  cmd.add_option("--backend", args.backend, "Override backend kind")
      ->check(CLI::IsMember({"mock", "http"}));
  cmd.add_option("--mock-script", args.mock_script, "Override mock script path");
  cmd.add_option("--endpoint", args.endpoint, "Override HTTP endpoint");
  cmd.add_option("--delta", args.delta, "Override retrieval threshold");
}

int ExitCode(ErrorCategory category) { return static_cast<int>(category); }

}  // namespace

int Run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Trigger-to-instruction recommendation engine", "mira"};
  app.require_subcommand(1);

  BuildTrieArgs build_args;
  auto* build = app.add_subcommand("build-trie", "Build vocabulary and trie, write a debug dump");
  build->add_option("--instructions", build_args.instructions, "Instruction library JSON")
      ->required()
      ->check(CLI::ExistingFile);
  build->add_option("--out", build_args.out, "Trie dump output")->required();
  build->add_option("--vocab-out", build_args.vocab_out, "Vocabulary output");

  RecommendArgs rec_args;
  auto* recommend = app.add_subcommand("recommend", "Recommend instructions for one trigger");
  AddCommonOptions(*recommend, rec_args.common);
  recommend->add_option("--trigger", rec_args.trigger, "Trigger JSON")
      ->required()
      ->check(CLI::ExistingFile);
  recommend->add_option("--k", rec_args.k, "Number of recommendations")->check(CLI::Range(1, 3));

  auto* tmpl = app.add_subcommand("template", "Manage the template library");
  tmpl->require_subcommand(1);
  CommonArgs list_args;
  auto* list = tmpl->add_subcommand("list", "Print the template library");
  AddCommonOptions(*list, list_args);
  TemplateAddArgs add_args;
  auto* add = tmpl->add_subcommand("add", "Insert templates that pass the novelty gate");
  AddCommonOptions(*add, add_args.common);
  add->add_option("--template", add_args.file, "Template JSON (object or array)")
      ->required()
      ->check(CLI::ExistingFile);
  DistillArgs distill_args;
  auto* distill = tmpl->add_subcommand("distill", "Distill templates from the retrieval-miss log");
  AddCommonOptions(*distill, distill_args.common);
  distill->add_option("--min-cluster", distill_args.min_cluster, "Smallest cluster summarized");
  distill->add_option("--link-threshold", distill_args.link_threshold, "Clustering similarity");

  ConstructArgs construct_args;
  auto* construct =
      app.add_subcommand("construct-dataset", "Generate reasoning for (trigger, gold) pairs");
  AddCommonOptions(*construct, construct_args.common);
  construct->add_option("--pairs", construct_args.pairs, "Pairs JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  construct->add_option("--out", construct_args.out, "SFT JSONL output")->required();

  EvalArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Evaluate on a labelled test set");
  AddCommonOptions(*eval, eval_args.common);
  eval->add_option("--testset", eval_args.testset, "Eval set JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--sweep-deltas", eval_args.sweep_deltas, "Comma-separated thresholds")
      ->delimiter(',');
  eval->add_option("--k", eval_args.k, "Recommendations per sample")->check(CLI::Range(1, 3));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : ExitCode(ErrorCategory::kUsage);
  }

  try {
    if (build->parsed()) {
      BuildTrieCommand(build_args, out);
    } else if (recommend->parsed()) {
      RecommendCommand(rec_args, out);
    } else if (list->parsed()) {
      TemplateListCommand(list_args, out);
    } else if (add->parsed()) {
      TemplateAddCommand(add_args, out);
    } else if (distill->parsed()) {
      TemplateDistillCommand(distill_args, out);
    } else if (construct->parsed()) {
      ConstructDatasetCommand(construct_args, out, err);
    } else if (eval->parsed()) {
      EvalCommand(eval_args, out, err);
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return ExitCode(CategoryOf(e.code()));
  } catch (const Json::exception& e) {
    err << "error: malformed JSON: " << e.what() << '\n';
    return ExitCode(ErrorCategory::kInvariant);
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return ExitCode(ErrorCategory::kIO);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return ExitCode(ErrorCategory::kInvariant);
  }
  return 0;
}

}  // namespace mira::cli
