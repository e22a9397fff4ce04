#include <doctest.h>

#include <fstream>
#include <map>
#include <set>

#include "mira/error.hpp"
#include "mira/evaluation.hpp"
#include "metrics_oracle.hpp"
#include "scenario_suite.hpp"
#include "test_support.hpp"

using namespace mira;
using namespace mira::testing;

namespace {

ErrorCode CodeOf(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInvariantViolation;
}

const std::vector<std::size_t> kK13 = {1, 3};

}  // namespace

TEST_CASE("perfect predictor scores 1 everywhere") {
  const Predictions preds = {{"a", "b"}, {"b"}, {"c", "a", "b"}};
  const std::vector<std::string> golds = {"a", "b", "c"};
  const Metrics m = ComputeMetrics(preds, golds, kK13);
  CHECK(m.precision == 1.0);
  CHECK(m.recall == 1.0);
  CHECK(m.macro_f1 == 1.0);
  CHECK(m.hr(1) == 1.0);
  CHECK(m.hr(3) == 1.0);
}

TEST_CASE("worked example: two classes, one confusion") {
  const Predictions preds = {{"A"}, {"A"}, {"B"}};
  const std::vector<std::string> golds = {"A", "B", "B"};
  const Metrics m = ComputeMetrics(preds, golds, kK13);
  CHECK(m.precision == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(m.recall == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(m.macro_f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(m.hr(1) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  const Json json = ToJson(m);
  CHECK(json.contains("hr@1"));
  CHECK(json.contains("hr@3"));
  CHECK(json.begin().key() == "recall");
}

TEST_CASE("hit rate counts containment in the first k") {
  const Predictions preds = {{"x", "y", "g"}, {"g"}, {"x", "y", "z"}, {}};
  const std::vector<std::string> golds = {"g", "g", "g", "g"};
  const std::vector<std::size_t> ks = {1, 2, 3};
  const Metrics m = ComputeMetrics(preds, golds, ks);
  CHECK(m.hr(1) == 0.25);
  CHECK(m.hr(2) == 0.25);
  CHECK(m.hr(3) == 0.5);
  CHECK(CodeOf([&] { m.hr(4); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("metric errors") {
  const Predictions preds = {{"a"}};
  const std::vector<std::string> two = {"a", "b"};
  CHECK(CodeOf([&] { ComputeMetrics(preds, two, kK13); }) == ErrorCode::kLengthMismatch);
  const std::vector<std::string> one = {"a"};
  const std::vector<std::string> library = {"b"};
  CHECK(CodeOf([&] { ComputeMetrics(preds, one, kK13, library); }) ==
        ErrorCode::kUnknownInstructionId);
  const std::vector<std::size_t> zero = {0};
  CHECK(CodeOf([&] { ComputeMetrics(preds, one, zero); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("property: metrics agree with the hand oracle, stay in range and ignore order") {
  Gen gen(99);
  const std::vector<std::size_t> ks = {1, 2, 3};
  for (int round = 0; round < 300; ++round) {
    Predictions preds;
    std::vector<std::string> golds;
    RandomFixture(gen, 40, preds, golds);
    const Metrics m = ComputeMetrics(preds, golds, ks);
    const Oracle o = HandOracle(preds, golds);
    CHECK(std::abs(m.precision - o.precision) <= 1e-12);
    CHECK(std::abs(m.recall - o.recall) <= 1e-12);
    CHECK(std::abs(m.macro_f1 - o.f1) <= 1e-12);
    for (std::size_t k : ks) CHECK(std::abs(m.hr(k) - o.hr.at(k)) <= 1e-12);

    for (double v : {m.precision, m.recall, m.macro_f1, m.hr(1), m.hr(2), m.hr(3)}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(m.hr(1) <= m.hr(2));
    CHECK(m.hr(2) <= m.hr(3));

    std::vector<std::size_t> order(golds.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), gen.engine());
    Predictions p2;
    std::vector<std::string> g2;
    for (std::size_t i : order) {
      p2.push_back(preds[i]);
      g2.push_back(golds[i]);
    }
    const Metrics shuffled = ComputeMetrics(p2, g2, ks);
    CHECK(std::abs(shuffled.macro_f1 - m.macro_f1) <= 1e-12);
    CHECK(std::abs(shuffled.hr(3) - m.hr(3)) <= 1e-12);
  }
}

TEST_CASE("scenario suite is laid out as designed") {
  const ScenarioSuite suite = BuildScenarioSuite();
  CHECK(suite.scenarios.size() == 20);
  const auto problems = CheckSuiteDesign(suite);
  for (const auto& p : problems) MESSAGE(p);
  CHECK(problems.empty());
}

TEST_CASE("delta 1 reproduces the no-template baseline") {
  const ScenarioSuite suite = BuildScenarioSuite();
  const auto samples = suite.samples();
  const Pipeline with = MakeSuitePipeline(suite, true);
  const Pipeline without = MakeSuitePipeline(suite, false);
  const EvaluationRun a = Evaluate(with, samples, RetrievalConfig{1.0, 0.5}, 3);
  const EvaluationRun b = Evaluate(without, samples, RetrievalConfig{1.0, 0.5}, 3);
  CHECK(a.failures.empty());
  CHECK(a.predictions == b.predictions);
  CHECK(a.metrics.hr(1) == doctest::Approx(0.6));
}

TEST_CASE("delta 0 retrieves for every sample") {
  const ScenarioSuite suite = BuildScenarioSuite();
  const auto samples = suite.samples();
  const Pipeline pipeline = MakeSuitePipeline(suite, true);
  const EvaluationRun run = Evaluate(pipeline, samples, RetrievalConfig{0.0, 0.5}, 3);
  CHECK(run.failures.empty());
  CHECK(pipeline.templates().distillation_log().empty());
  CHECK(run.metrics.hr(1) == doctest::Approx(0.8));
}

TEST_CASE("sweep rows, CSV and partial failures") {
  const ScenarioSuite suite = BuildScenarioSuite();
  auto samples = suite.samples();
  const Pipeline pipeline = MakeSuitePipeline(suite, true);
  const std::vector<double> deltas = {0.4, 0.5, 0.6, 0.8};
  const auto rows = DeltaSweep(pipeline, samples, deltas, 3);
  REQUIRE(rows.size() == 4);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    CHECK(rows[i].delta == deltas[i]);
    CHECK_FALSE(rows[i].partial());
  }
  CHECK(rows[2].metrics.hr(1) == doctest::Approx(1.0));

  const std::string csv = SweepCsv(rows);
  CHECK(csv.starts_with("delta,recall,precision,macro_f1,hr1,hr3\n"));
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
  CHECK(csv.find("\n0.600000,") != std::string::npos);
  CHECK(ToJson(std::span<const SweepRow>(rows)).size() == 4);

  // An unscripted trigger fails inside the pipeline and counts as a miss.
  EvalSample stray = samples[0];
  stray.trigger.id = "stray";
  stray.trigger.text = "nothing scripted for this";
  samples.push_back(stray);
  const std::vector<double> one = {0.6};
  const auto partial = DeltaSweep(pipeline, samples, one, 3);
  REQUIRE(partial[0].failures.size() == 1);
  CHECK(partial[0].partial());
  CHECK(partial[0].failures[0].trigger_id == "stray");
  CHECK(partial[0].metrics.hr(1) == doctest::Approx(20.0 / 21.0));
}

TEST_CASE("eval set JSONL loads") {
  const auto samples = LoadEvalSet(std::filesystem::path(MIRA_TEST_DATA) / "hotel" / "eval.jsonl");
  REQUIRE(samples.size() == 1);
  CHECK(samples[0].gold == "add-calendar");
  CHECK(samples[0].trigger.id == "sms-0412");

  const auto dir = TempDir("evalset");
  {
    std::ofstream out(dir / "bad.jsonl");
    out << "{\"gold\": \"x\"}\n";
  }
  CHECK_THROWS_AS(LoadEvalSet(dir / "bad.jsonl"), std::exception);
  CHECK(CodeOf([&] { LoadEvalSet(dir / "absent.jsonl"); }) == ErrorCode::kIOFailure);
  std::filesystem::remove_all(dir);
}
