// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <array>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include "metrics_oracle.hpp"
#include "mira/embedding.hpp"
#include "mira/evaluation.hpp"
#include "mira/instruction_trie.hpp"
#include "mira/template_library.hpp"
#include "scenario_suite.hpp"
#include "test_support.hpp"

using namespace mira;
using namespace mira::testing;

namespace {

// Pinned limits.
constexpr double kSoundnessSeconds = 10.0;
constexpr double kSweepSeconds = 60.0;
constexpr double kMetricsTolerance = 1e-12;
constexpr double kNoveltyDelta = 0.5;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

std::string Fmt(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

// 1. Random scorers never lead the greedy walk outside the library.
Outcome Soundness() {
  Gen gen(1001);
  const auto trie = MakeTrie(RandomLibrary(gen, 50));
  const auto start = Clock::now();
  std::size_t members = 0, exceptions = 0;
  constexpr std::size_t kScorers = 1000;
  for (std::size_t seed = 0; seed < kScorers; ++seed) {
    try {
      const DecodeResult r = ConstrainedDecode(*trie, RandomScorer(seed, trie->vocab_size(), true));
      const Instruction* inst = trie->find_instruction(r.instruction_id);
      TokenSequence expected = inst ? inst->token_ids : TokenSequence{};
      expected.push_back(trie->end_of_sequence());
      if (inst && r.path == expected) ++members;
    } catch (const std::exception&) {
      ++exceptions;
    }
  }
  const double secs = Seconds(start);
  return {members == kScorers && exceptions == 0 && secs < kSoundnessSeconds,
          std::to_string(members) + "/" + std::to_string(kScorers) + " in library, " +
              std::to_string(exceptions) + " exceptions, " + Fmt(secs) + " s (limit " +
              Fmt(kSoundnessSeconds) + " s)"};
}

// 2. The one-hot scorer for each path recovers its instruction.
Outcome Completeness() {
  Gen gen(2002);
  const auto trie = MakeTrie(RandomLibrary(gen, 50));
  std::size_t recovered = 0;
  for (const Instruction& inst : trie->instructions()) {
    TokenSequence path = Tokenize(trie->vocabulary(), inst.surface);
    path.push_back(trie->end_of_sequence());
    if (ConstrainedDecode(*trie, OneHotScorer(path, trie->vocab_size())).instruction_id == inst.id) {
      ++recovered;
    }
  }
  return {recovered == trie->instructions().size(),
          std::to_string(recovered) + "/" + std::to_string(trie->instructions().size()) + " recovered"};
}

bool SameTopK(const std::vector<DecodeResult>& got, const std::vector<PathScore>& all, std::size_t k) {
  if (got.size() != k) return false;
  for (std::size_t i = 0; i < k; ++i) {
    if (got[i].instruction_id != all[i].id || got[i].score != all[i].score || got[i].path != all[i].path) {
      return false;
    }
  }
  return true;
}

// 3. Beam search with width >= library size against path enumeration.
Outcome BeamExactness() {
  Gen gen(3003);
  std::size_t checks = 0, exact = 0, narrow_agree = 0;
  for (std::size_t round = 0; round < 200; ++round) {
    const std::size_t n = 1 + round % 50;
    const auto trie = MakeTrie(RandomLibrary(gen, n));
    const Scorer scorer = RandomScorer(round * 7919 + 1, trie->vocab_size(), round % 2 == 0);
    const auto all = EnumeratePaths(trie->instructions(), trie->vocabulary(), scorer);
    for (std::size_t k : {std::size_t{1}, std::min<std::size_t>(3, n), n}) {
      ++checks;
      if (SameTopK(TopKDecode(*trie, scorer, k, n), all, k)) ++exact;
      if (SameTopK(TopKDecode(*trie, scorer, k), all, k)) ++narrow_agree;
    }
  }
  return {exact == checks, std::to_string(exact) + "/" + std::to_string(checks) +
                               " exact at width = library size (width k alone agreed on " +
                               std::to_string(narrow_agree) + ")"};
}

// 4. A decoded instruction of L tokens costs L + 1 scorer calls.
Outcome PerTokenCost() {
  Gen gen(4004);
  std::size_t good = 0;
  constexpr std::size_t kDecodes = 100;
  for (std::size_t i = 0; i < kDecodes; ++i) {
    const auto trie = MakeTrie(RandomLibrary(gen, gen.between(1, 50), 6));
    std::size_t calls = 0;
    const Scorer inner = RandomScorer(i, trie->vocab_size());
    const Scorer counting = [&](std::span<const TokenId> prefix) {
      ++calls;
      return inner(prefix);
    };
    const DecodeResult r = ConstrainedDecode(*trie, counting);
    const std::size_t length = Tokenize(trie->vocabulary(), trie->find_instruction(r.instruction_id)->surface).size();
    if (calls == length + 1) ++good;
  }
  return {good == kDecodes, std::to_string(good) + "/" + std::to_string(kDecodes) + " decodes used L+1 calls"};
}

const std::vector<std::string> kTemplateWords = {
    "hotel", "check-in", "check-out", "room", "phone", "number", "station", "train", "ticket",
    "date",  "address",  "contact",   "meeting", "map", "taxi",  "parcel",  "code",  "flight"};

std::string RandomTemplateText(Gen& gen) { return gen.sentence(kTemplateWords, 1, 8); }

// 5. Retrieval against an exact integer brute-force scan.
Outcome RetrievalOracle() {
  Gen gen(5005);
  std::size_t agree = 0, none_cases = 0;
  constexpr std::size_t kLibraries = 100;
  for (std::size_t round = 0; round < kLibraries; ++round) {
    TemplateLibrary library(std::make_shared<HashingEmbedder>());
    std::vector<CountedTemplate> oracle;
    const std::size_t n = 1 + round;
    for (std::size_t i = 0; i < n; ++i) {
      Template t = MakeTemplate("t" + std::to_string(gen.index(10000)) + "-" + std::to_string(i),
                                RandomTemplateText(gen), {}, "", {RandomTemplateText(gen)},
                                library.embedder());
      oracle.push_back({t.id, EmbeddingText(t)});
      library.Insert(std::move(t));
    }
    const ReasoningTrace query = MakeReasoningTrace(
        {{ReasoningStage::kEntityRecognition, RandomTemplateText(gen)},
         {ReasoningStage::kInstructionGeneration, RandomTemplateText(gen)}});
    const std::int64_t m = static_cast<std::int64_t>(gen.between(0, 20));
    const auto expected = ExactRetrieve(query.raw, oracle, m, 20);
    const auto got = library.Retrieve(query, RetrievalConfig{static_cast<double>(m) / 20.0, kNoveltyDelta});
    if (!expected) ++none_cases;
    const bool logged = library.distillation_log().size() == (expected ? 0u : 1u);
    if (got.has_value() == expected.has_value() && (!got || got->tmpl.id == *expected) && logged) ++agree;
  }
  return {agree == kLibraries, std::to_string(agree) + "/" + std::to_string(kLibraries) +
                                   " libraries agree (" + std::to_string(none_cases) + " none-cases)"};
}

// 6. The audit log of 200 gated insertions.
Outcome NoveltyGate() {
  Gen gen(6006);
  TemplateLibrary library(std::make_shared<HashingEmbedder>());
  std::vector<std::string> admitted;  // embedding texts, for the reference maximum
  std::size_t violations = 0, added = 0;
  constexpr std::size_t kCandidates = 200;
  for (std::size_t i = 0; i < kCandidates; ++i) {
    Template t = MakeTemplate("c" + std::to_string(i), RandomTemplateText(gen), {}, "",
                              {RandomTemplateText(gen)}, library.embedder());
    const std::string text = EmbeddingText(t);
    double reference = -std::numeric_limits<double>::infinity();
    for (const std::string& prior : admitted) {
      reference = std::max(reference, ReferenceCosine(ReferenceBagOfWords(text), ReferenceBagOfWords(prior)));
    }
    const NoveltyDecision d = library.AddIfNovel(std::move(t), RetrievalConfig{0.6, kNoveltyDelta});
    const bool reference_agrees =
        admitted.empty() ? d.max_similarity == reference : std::abs(d.max_similarity - reference) <= 1e-12;
    if (!reference_agrees) ++violations;
    if (d.verdict == NoveltyVerdict::kAdded) admitted.push_back(text);
  }
  for (const NoveltyAuditRecord& r : library.audit_log()) {
    const bool ok = r.verdict == NoveltyVerdict::kAdded ? r.max_prior_similarity < kNoveltyDelta
                                                         : r.max_prior_similarity >= kNoveltyDelta;
    if (!ok) ++violations;
    if (r.verdict == NoveltyVerdict::kAdded) ++added;
  }
  const bool complete = library.audit_log().size() == kCandidates && library.size() == added;
  return {violations == 0 && complete,
          std::to_string(added) + " added, " + std::to_string(kCandidates - added) + " rejected, " +
              std::to_string(violations) + " violations"};
}

// 7. The threshold sweep over the scripted scenario suite.
Outcome ThresholdSweep() {
  const auto start = Clock::now();
  const ScenarioSuite suite = BuildScenarioSuite();
  const auto problems = CheckSuiteDesign(suite);
  if (!problems.empty()) return {false, "suite layout broken: " + problems.front()};
  const Pipeline pipeline = MakeSuitePipeline(suite, true);
  const auto samples = suite.samples();
  const std::vector<double> deltas = {0.0, 0.6, 1.0};
  const auto rows = DeltaSweep(pipeline, samples, deltas, 3);
  const double secs = Seconds(start);
  const double hr0 = rows[0].metrics.hr(1), hr6 = rows[1].metrics.hr(1), hr10 = rows[2].metrics.hr(1);
  const bool complete = !rows[0].partial() && !rows[1].partial() && !rows[2].partial();
  return {hr6 > hr10 && hr6 >= hr0 && complete && secs < kSweepSeconds,
          "HR@1 " + Fmt(hr0) + " / " + Fmt(hr6) + " / " + Fmt(hr10) + " at delta 0 / 0.6 / 1, " +
              Fmt(secs) + " s (limit " + Fmt(kSweepSeconds) + " s)"};
}

// 8. ComputeMetrics against hand-counted confusion tables.
Outcome MetricsOracle() {
  std::vector<std::pair<Predictions, std::vector<std::string>>> fixtures;
  fixtures.push_back({{{"A"}, {"A"}, {"B"}}, {"A", "B", "B"}});
  Gen gen(8008);
  for (int i = 0; i < 10; ++i) {
    Predictions p;
    std::vector<std::string> g;
    RandomFixture(gen, 20, p, g);
    fixtures.push_back({p, g});
  }
  const std::vector<std::size_t> ks = {1, 2, 3};
  std::size_t good = 0;
  double worst = 0.0;
  for (const auto& [preds, golds] : fixtures) {
    const Metrics m = ComputeMetrics(preds, golds, ks);
    const Oracle o = HandOracle(preds, golds);
    double err = std::max({std::abs(m.precision - o.precision), std::abs(m.recall - o.recall),
                           std::abs(m.macro_f1 - o.f1)});
    for (std::size_t k : ks) err = std::max(err, std::abs(m.hr(k) - o.hr.at(k)));
    worst = std::max(worst, err);
    if (err <= kMetricsTolerance) ++good;
  }
  // The worked example, against the values counted by hand.
  const Metrics w = ComputeMetrics(fixtures[0].first, fixtures[0].second, ks);
  const bool worked = std::abs(w.macro_f1 - 2.0 / 3.0) <= kMetricsTolerance &&
                      std::abs(w.hr(1) - 2.0 / 3.0) <= kMetricsTolerance &&
                      std::abs(w.precision - 0.75) <= kMetricsTolerance;
  return {good == fixtures.size() && worked, std::to_string(good) + "/" + std::to_string(fixtures.size()) +
                                                 " fixtures within " + Fmt(kMetricsTolerance) +
                                                 " (worst " + Fmt(worst) + ")"};
}

std::pair<int, std::string> RunCommand(const std::string& command) {
  std::string output;
  FILE* pipe = popen(command.c_str(), "r");
  if (!pipe) return {-1, ""};
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) output.append(buf.data(), n);
  return {pclose(pipe), output};
}

// 9. The recommend command is byte-stable.
Outcome Determinism() {
  const std::string data = MIRA_TEST_DATA;
  const std::string command = std::string("'") + MIRA_CLI_PATH + "' recommend --config '" + data +
                              "/hotel/config.json' --trigger '" + data + "/hotel/trigger.json'";
  std::string first;
  std::size_t identical = 0;
  for (int run = 0; run < 5; ++run) {
    const auto [status, output] = RunCommand(command);
    if (status != 0 || output.empty()) return {false, "run " + std::to_string(run) + " exited " + std::to_string(status)};
    if (run == 0) first = output;
    if (output == first) ++identical;
  }
  return {identical == 5, std::to_string(identical) + "/5 runs byte-identical (" +
                              std::to_string(first.size()) + " bytes)"};
}

// 10. Readers during 100 rebuilds see whole, self-consistent tries.
Outcome RebuildSafety() {
  TrieStore store;
  const auto library_for = [](std::uint64_t generation) {
    std::vector<Instruction> library = MakeLibrary({"save phone number", "save address", "navigate to station"});
    library.push_back({"gen-" + std::to_string(generation), "marker w" + std::to_string(generation), {}});
    if (generation % 2 == 0) library.push_back({"even", "call office now", {}});
    return library;
  };
  const auto rebuild = [&](std::uint64_t generation) {
    auto library = library_for(generation);
    auto vocab = std::make_shared<const Vocabulary>(BuildVocabulary(library));
    store.Rebuild(std::move(library), std::move(vocab));
  };
  rebuild(1);

  std::atomic<bool> done{false};
  std::atomic<std::size_t> failures{0}, reads{0};
  std::vector<std::thread> readers;
  for (int r = 0; r < 4; ++r) {
    readers.emplace_back([&] {
      std::uint64_t last = 0;
      while (!done) {
        try {
          const auto trie = store.snapshot();
          const std::uint64_t g = trie->generation();
          bool ok = g >= last && trie->find_instruction("gen-" + std::to_string(g)) != nullptr &&
                    trie->instructions().size() == library_for(g).size();
          for (const Instruction& inst : trie->instructions()) {
            TokenSequence path = inst.token_ids;
            path.push_back(trie->end_of_sequence());
            const auto cursor = trie->walk(path);
            ok = ok && cursor.is_terminal() && cursor.instruction()->id == inst.id;
            ok = ok && ConstrainedDecode(*trie, OneHotScorer(path, trie->vocab_size())).instruction_id == inst.id;
          }
          if (!ok) ++failures;
          last = g;
          ++reads;
        } catch (const std::exception&) {
          ++failures;
        }
      }
    });
  }
  for (std::uint64_t g = 2; g <= 101; ++g) {
    // Let the readers get through a few snapshots of each generation.
    const std::size_t target = reads + 4;
    while (reads < target) std::this_thread::yield();
    rebuild(g);
  }
  done = true;
  for (auto& t : readers) t.join();
  const bool final_ok = store.generation() == 101;
  return {failures == 0 && final_ok && reads > 0,
          "100 rebuilds, " + std::to_string(reads.load()) + " reads, " + std::to_string(failures.load()) +
              " failures, final generation " + std::to_string(store.generation())};
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"trie soundness fuzz", Soundness},
      {"trie completeness", Completeness},
      {"beam exactness", BeamExactness},
      {"per-token scorer cost", PerTokenCost},
      {"retrieval oracle", RetrievalOracle},
      {"novelty gate audit", NoveltyGate},
      {"threshold sweep shape", ThresholdSweep},
      {"metrics oracle", MetricsOracle},
      {"end-to-end determinism", Determinism},
      {"rebuild safety", RebuildSafety},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome outcome;
    try {
      outcome = criteria[i].second();
    } catch (const std::exception& e) {
      outcome = {false, std::string("threw: ") + e.what()};
    }
    if (!outcome.pass) ++failed;
    std::cout << (outcome.pass ? "PASS" : "FAIL") << ' ' << (i + 1) << ' ' << criteria[i].first << ": "
              << outcome.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
