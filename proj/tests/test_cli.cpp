#include <doctest.h>

#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "mira/core_types.hpp"
#include "mira/template_library.hpp"
#include "scenario_suite.hpp"
#include "test_support.hpp"

using namespace mira;
using namespace mira::testing;
namespace fs = std::filesystem;

namespace {

const fs::path kData = MIRA_TEST_DATA;
const fs::path kHotel = kData / "hotel";

struct Outcome {
  int code;
  std::string out;
  std::string err;
};

Outcome Cli(std::vector<std::string> args) {
  args.insert(args.begin(), "mira");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::Run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

void Write(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string Read(const fs::path& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Hotel config rewritten into `dir` with absolute paths plus `extra` keys.
fs::path HotelConfig(const fs::path& dir, Json extra = Json::object()) {
  Json cfg = Json::parse(Read(kHotel / "config.json"));
  cfg["instructions"] = (kHotel / "instructions.json").string();
  cfg["templates"] = (kHotel / "templates.json").string();
  cfg["backend"]["mock_script"] = (kHotel / "script.json").string();
  for (auto& [key, value] : extra.items()) cfg[key] = value;
  Write(dir / "config.json", cfg.dump());
  return dir / "config.json";
}

}  // namespace

TEST_CASE("build-trie writes a dump and a summary") {
  const fs::path dir = TempDir("cli-build");
  const Outcome r = Cli({"build-trie", "--instructions", (kData / "instructions3.json").string(),
                         "--out", (dir / "trie.json").string(), "--vocab-out",
                         (dir / "vocab.json").string()});
  REQUIRE(r.code == 0);
  const Json summary = Json::parse(r.out);
  CHECK(summary["root_children"] == 2);
  CHECK(summary["terminals"] == 3);
  CHECK(summary["vocab_size"] == 10);
  const Json dump = Json::parse(Read(dir / "trie.json"));
  CHECK(dump["root"]["children"].size() == 2);
  CHECK(Json::parse(Read(dir / "vocab.json"))["tokens"].size() == 10);

  Write(dir / "bad.json", R"({"not": "an array"})");
  CHECK(Cli({"build-trie", "--instructions", (dir / "bad.json").string(), "--out",
             (dir / "x.json").string()})
            .code == 4);
  fs::remove_all(dir);
}

TEST_CASE("recommend prints the result for the hotel trigger") {
  const Outcome r = Cli({"recommend", "--config", (kHotel / "config.json").string(), "--trigger",
                         (kHotel / "trigger.json").string()});
  REQUIRE(r.code == 0);
  const Json result = Json::parse(r.out);
  CHECK(result["template_used"] == "hotel-reservation");
  CHECK(result["instructions"] == Json::array({"add-calendar", "save-phone", "call-hotel"}));

  const Outcome one = Cli({"recommend", "--config", (kHotel / "config.json").string(), "--trigger",
                           (kHotel / "trigger.json").string(), "--k", "1"});
  CHECK(Json::parse(one.out)["instructions"].size() == 1);
}

TEST_CASE("recommend logs retrieval misses") {
  const fs::path dir = TempDir("cli-log");
  const fs::path config =
      HotelConfig(dir, Json{{"delta", 0.99}, {"distillation_log", (dir / "misses.jsonl").string()}});
  const Outcome r = Cli({"recommend", "--config", config.string(), "--trigger",
                         (kHotel / "trigger.json").string()});
  REQUIRE(r.code == 0);
  CHECK(Json::parse(r.out)["template_used"].is_null());
  const auto log = ReadDistillationLog(dir / "misses.jsonl");
  REQUIRE(log.size() == 1);
  CHECK(log[0].trigger_id == "sms-0412");
  fs::remove_all(dir);
}

TEST_CASE("exit codes follow the error category") {
  const std::string config = (kHotel / "config.json").string();
  const std::string trigger = (kHotel / "trigger.json").string();
  CHECK(Cli({"--help"}).code == 0);
  CHECK(Cli({"recommend", "--trigger", trigger}).code == 1);
  CHECK(Cli({"recommend", "--config", config, "--trigger", trigger, "--k", "4"}).code == 1);
  CHECK(Cli({"recommend", "--config", config, "--trigger", trigger, "--delta", "1.5"}).code == 1);
  CHECK(Cli({"recommend", "--config", config, "--trigger", trigger, "--backend", "http",
             "--endpoint", "http://127.0.0.1:1"})
            .code == 3);

  const fs::path dir = TempDir("cli-exit");
  const fs::path missing = HotelConfig(dir, Json{{"templates", (dir / "absent.json").string()}});
  CHECK(Cli({"recommend", "--config", missing.string(), "--trigger", trigger}).code == 2);

  const fs::path silent_script = dir / "silent.json";
  Write(silent_script, R"({"entries": []})");
  const Outcome r = Cli({"recommend", "--config", config, "--trigger", trigger, "--mock-script",
                         silent_script.string()});
  CHECK(r.code == 3);
  CHECK(r.err.find("NoScriptMatch") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("template add, list and distill") {
  const fs::path dir = TempDir("cli-templates");
  fs::copy_file(kHotel / "templates.json", dir / "templates.json");
  Write(dir / "summary.json",
        R"({"entries": [{"text": "{\"name\": \"parcel pickup\", \"tags\": [\"parcel\"], \"scenarios\": \"delivery notices\", \"steps\": [\"find the locker code\", \"note the pickup deadline\"]}"}]})");
  const fs::path config = HotelConfig(dir, Json{{"templates", (dir / "templates.json").string()},
                                                {"distillation_log", (dir / "log.jsonl").string()}});
  const std::string cfg = config.string();

  Outcome listed = Cli({"template", "list", "--config", cfg});
  REQUIRE(listed.code == 0);
  CHECK(Json::parse(listed.out).size() == 2);

  Json candidates = Json::parse(Read(kHotel / "templates.json"));
  candidates[0]["id"] = "hotel-again";
  candidates[1] = Json{{"id", "weather"},
                       {"name", "weather alert"},
                       {"tags", {"storm"}},
                       {"scenarios", "severe weather warnings"},
                       {"steps", {"read the warning level", "suggest checking the forecast"}}};
  candidates.push_back(Json{{"id", "train-ticket"}, {"name", "x"}, {"steps", {"y"}}});
  Write(dir / "candidates.json", candidates.dump());
  const Outcome added = Cli({"template", "add", "--config", cfg, "--template", (dir / "candidates.json").string()});
  REQUIRE(added.code == 0);
  const Json report = Json::parse(added.out);
  CHECK(report["candidates"][0]["verdict"] == "Rejected");
  CHECK(report["candidates"][1]["verdict"] == "Added");
  CHECK(report["candidates"][2]["verdict"] == "Rejected");
  CHECK(report["candidates"][2].contains("reason"));
  CHECK(report["after"]["size"] == 3);
  CHECK(Json::parse(Read(dir / "templates.json")).size() == 3);

  // Two identical misses make one cluster.
  const ReasoningTrace miss = MakeReasoningTrace(
      {{ReasoningStage::kEntityRecognition, "a parcel locker code and pickup deadline"},
       {ReasoningStage::kInstructionGeneration, "remind the user to pick up the parcel"}});
  const std::vector<DistillationLogEntry> log = {{"p1", miss, 0.1, {}}, {"p2", miss, 0.2, {}}};
  AppendDistillationLog(dir / "log.jsonl", log);
  const Outcome distilled = Cli({"template", "distill", "--config", cfg, "--mock-script",
                                 (dir / "summary.json").string()});
  REQUIRE(distilled.code == 0);
  const Json d = Json::parse(distilled.out);
  CHECK(d["log_entries"] == 2);
  REQUIRE(d["candidates"].size() == 1);
  CHECK(d["candidates"][0]["verdict"] == "Added");
  CHECK(d["candidates"][0]["template"]["name"] == "parcel pickup");
  CHECK(d["after"]["size"] == 4);
  fs::remove_all(dir);
}

TEST_CASE("construct-dataset writes SFT records") {
  const fs::path dir = TempDir("cli-construct");
  Write(dir / "script.json",
        R"({"entries": [{"match": ["Correct instruction: add stay to calendar"], "text": "<REASONING>\nEntity Recognition: a hotel stay.\nInstruction Generation: add stay to calendar.\n</REASONING>"}]})");
  Write(dir / "pairs.jsonl", Read(kHotel / "eval.jsonl") +
                                 R"({"trigger": {"id": "x", "modality": "text", "text": "hi"}, "gold": "no-such-id"})" "\n");
  const fs::path config = HotelConfig(dir);
  const Outcome r = Cli({"construct-dataset", "--config", config.string(), "--mock-script",
                         (dir / "script.json").string(), "--pairs", (dir / "pairs.jsonl").string(),
                         "--out", (dir / "sft.jsonl").string()});
  REQUIRE(r.code == 0);
  const Json report = Json::parse(r.out);
  CHECK(report["pairs"] == 2);
  CHECK(report["written"] == 1);
  CHECK(report["construction_failures"].size() == 1);
  const Json record = Json::parse(Read(dir / "sft.jsonl"));
  CHECK(record["instruction"] == "add stay to calendar");
  CHECK(record["reasoning"].get<std::string>().starts_with("<REASONING>"));
  fs::remove_all(dir);
}

TEST_CASE("eval prints metrics and sweeps") {
  const Outcome single = Cli({"eval", "--config", (kHotel / "config.json").string(), "--testset",
                              (kHotel / "eval.jsonl").string()});
  REQUIRE(single.code == 0);
  const Json m = Json::parse(single.out);
  CHECK(m["hr@1"] == 1.0);
  CHECK(m["samples"] == 1);
  CHECK(m["partial"] == false);

  const fs::path dir = TempDir("cli-eval");
  const fs::path config = WriteSuiteFiles(BuildScenarioSuite(), dir);
  const Outcome sweep = Cli({"eval", "--config", config.string(), "--testset",
                             (dir / "testset.jsonl").string(), "--sweep-deltas", "0.4,0.5,0.6,0.8"});
  REQUIRE(sweep.code == 0);
  std::istringstream lines(sweep.out);
  std::vector<std::string> rows;
  for (std::string line; std::getline(lines, line);) rows.push_back(line);
  REQUIRE(rows.size() == 5);
  CHECK(rows[0] == "delta,recall,precision,macro_f1,hr1,hr3");
  CHECK(rows[1].starts_with("0.400000,"));
  CHECK(rows[4].starts_with("0.800000,"));
  fs::remove_all(dir);
}
