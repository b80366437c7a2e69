#include "doctest.h"

#include "adaptq/experiment.hpp"
#include "adaptq/service.hpp"
#include "cli.hpp"
#include "support.hpp"

#include <sstream>

using namespace adaptq;
using nlohmann::json;
using testing::TempDir;

namespace {

struct Invocation {
  int code = -1;
  std::string out;
  std::string err;
};

Invocation run(std::vector<std::string> args, const std::string& input = {}) {
  std::istringstream in(input);
  std::ostringstream out;
  std::ostringstream err;
  Invocation r;
  r.code = cli::run(args, in, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string fx(const std::string& name) { return testing::fixture(name).string(); }

}  // namespace

TEST_CASE("exit codes") {
  CHECK(run({}).code == cli::kExitUsage);
  CHECK(run({"frobnicate"}).code == cli::kExitUsage);
  CHECK(run({"curriculum", "validate", "--bogus", "x"}).code == cli::kExitUsage);

  auto ok = run({"curriculum", "validate", (testing::source_dir() / "curricula/grade9-math.json").string()});
  CHECK(ok.code == cli::kExitOk);

  auto empty = run({"curriculum", "validate", fx("empty.json")});
  CHECK(empty.code == cli::kExitDomain);
  CHECK(empty.err.find("error") != std::string::npos);

  auto missing = run({"curriculum", "validate", "/nonexistent/c.json", "--json"});
  CHECK(missing.code == cli::kExitDomain);
  CHECK(json::parse(missing.out).contains("error"));
}

TEST_CASE("interactive session matches the reviewed transcript") {
  TempDir dir;
  auto r = run({"session", "run", "--interactive", "--state-dir", dir.path().string(),
                "--curriculum", "grade9-algebra", "--provider", "mock", "--script",
                fx("session-script.json"), "--seed", "1"},
               read_file(testing::fixture("session-stdin.txt")));
  CHECK(r.code == cli::kExitOk);
  CHECK(r.out == read_file(testing::fixture("golden/interactive.txt")));

  // The stored session reports the same numbers.
  std::string id = "2245bd5fbb686f6822eb92502318fa4e";
  auto report = run({"session", "report", id, "--state-dir", dir.path().string(), "--json"});
  REQUIRE(report.code == cli::kExitOk);
  auto doc = json::parse(report.out);
  CHECK(doc["attempts"] == 12);
  CHECK(doc["correct"] == 10);
}

TEST_CASE("quitting pauses and resume continues") {
  TempDir dir;
  std::vector<std::string> base{"session", "run", "--interactive", "--state-dir",
                                dir.path().string(), "--curriculum", "grade9-algebra",
                                "--script", fx("session-script.json"), "--seed", "1"};
  auto first = run(base, "a\nc\nq\n");
  CHECK(first.code == cli::kExitOk);
  CHECK(first.out.find("Session paused.") != std::string::npos);

  std::string stdin_text = read_file(testing::fixture("session-stdin.txt"));
  std::string rest = stdin_text.substr(4);  // drop the two answers already given
  auto resumed = run({"session", "run", "--interactive", "--state-dir", dir.path().string(),
                      "--script", fx("session-script.json"), "--resume",
                      "2245bd5fbb686f6822eb92502318fa4e"},
                     rest);
  CHECK(resumed.code == cli::kExitOk);
  CHECK(resumed.out.find("All chapters mastered.") != std::string::npos);
  CHECK(resumed.out.find("Overall: 10/12 correct (83.33%)") != std::string::npos);
}

TEST_CASE("simulate agrees with the independent oracle") {
  auto golden = json::parse(read_file(testing::fixture("golden/session-report.json")));
  TempDir dir;
  auto r = run({"simulate", "--script", fx("session-script.json"), "--curriculum",
                "grade9-algebra", "--seed", "1", "--json", "--state-dir", dir.path().string()});
  REQUIRE(r.code == cli::kExitOk);
  auto doc = json::parse(r.out);
  CHECK(doc["attempts"] == golden["attempts"]);
  CHECK(doc["correct"] == golden["correct"]);
  REQUIRE(doc["chapters"].size() == golden["chapters"].size());
  for (std::size_t i = 0; i < doc["chapters"].size(); ++i) {
    for (const char* key : {"chapter", "attempts", "correct", "difficulty", "mastered"}) {
      CHECK(doc["chapters"][i][key] == golden["chapters"][i][key]);
    }
  }
}

TEST_CASE("experiment run prints the table") {
  TempDir dir;
  auto r = run({"experiment", "run", "--config", fx("mock-table2.json"), "--out",
                (dir / "exp").string()});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(r.out.find("Teaching without Explanation (%)") != std::string::npos);
  CHECK(r.out.find("51.43%") != std::string::npos);
  auto table2 = run({"report", "table2", "--experiment", (dir / "exp").string(), "--csv"});
  REQUIRE(table2.code == cli::kExitOk);
  CHECK(table2.out.find("4,51.43,34.29") != std::string::npos);
}

TEST_CASE("grading import and table1") {
  TempDir dir;
  auto imported = run({"grade", "import", fx("grades-table1.csv"), "--state-dir",
                       dir.path().string()});
  REQUIRE(imported.code == cli::kExitOk);
  auto again = run({"grade", "import", fx("grades-table1.csv"), "--state-dir",
                    dir.path().string()});
  CHECK(again.code == cli::kExitDomain);
  auto table = run({"report", "table1", "--state-dir", dir.path().string(), "--csv"});
  REQUIRE(table.code == cli::kExitOk);
  CHECK(table.out.find("Numbers,50,50,90") != std::string::npos);
  CHECK(table.out.find("Financial Mathematics,76,70,93") != std::string::npos);
  auto half_up = run({"report", "table1", "--grades", fx("grades-table1.csv"), "--rounding",
                      "half-up", "--csv"});
  CHECK(half_up.out.find("Financial Mathematics,77,70,93") != std::string::npos);
  CHECK(run({"report", "table1", "--grades", fx("grades-table1.csv"), "--per-cell", "29"}).code ==
        cli::kExitDomain);
}

TEST_CASE("fine-tune export from a stored bank") {
  TempDir dir;
  REQUIRE(run({"experiment", "run", "--config", fx("mock-baseline.json"), "--out",
               (dir / "exp").string()})
              .code == cli::kExitOk);
  auto r = run({"export-finetune", "--bank", (dir / "exp/bank.json").string(), "--out",
                (dir / "ft.jsonl").string()});
  REQUIRE(r.code == cli::kExitOk);
  auto lines = split_lines(read_file(dir / "ft.jsonl"));
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  CHECK(lines.size() == 20);
  CHECK(json::parse(lines[0])["messages"][0]["role"] == "user");
}

// Each service route has a CLI counterpart producing the same data.
TEST_CASE("service and CLI parity") {
  TempDir dir;
  ServiceConfig cfg;
  cfg.data_dir = testing::source_dir();
  cfg.state_dir = dir / "state";
  cfg.config_base = testing::fixture("");
  cfg.teacher.script_path = testing::fixture("session-script.json");
  cfg.clock = logical_clock();

  std::string session_id;
  json service_report;
  json experiment_result;
  {
    Service service(cfg);
    // POST /sessions, GET next, POST answers: the interactive loop.
    session_id = service.create_session({{"curriculum", "grade9-algebra"}}).body["session_id"];
    for (const char* label : {"a", "c", "c"}) {
      auto q = service.next_question(session_id).body["question"];
      REQUIRE(service.answer(session_id, {{"question_id", q["id"]}, {"label", label}}).status ==
              200);
    }
    // GET report: session report.
    service_report = service.report(session_id).body;
    // POST /experiments, GET /experiments/{id}: experiment run, report table2.
    auto started = service.start_experiment(
        json::parse(read_file(testing::fixture("mock-baseline.json"))));
    service.wait_experiments();
    experiment_result =
        service.experiment_status(started.body["experiment_id"]).body["result"];
  }

  auto cli_report = run({"session", "report", session_id, "--state-dir",
                         cfg.state_dir.string(), "--json"});
  REQUIRE(cli_report.code == cli::kExitOk);
  CHECK(json::parse(cli_report.out) == service_report);

  auto cli_experiment = run({"experiment", "run", "--config", fx("mock-baseline.json"), "--out",
                             (dir / "cli-exp").string(), "--json"});
  REQUIRE(cli_experiment.code == cli::kExitOk);
  auto cli_result = ExperimentResult::load(dir / "cli-exp/result.json");
  auto svc_result = ExperimentResult::from_json(experiment_result);
  CHECK(cli_result.render_table_text() == svc_result.render_table_text());
  CHECK(cli_result.config_hash == svc_result.config_hash);
}
