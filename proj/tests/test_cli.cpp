#include <doctest.h>

#include "support.hpp"

using testkit::quote;
using testkit::run_cli;

TEST_CASE("replay writes the golden outputs") {
  testkit::TempDir dir;
  const auto r = testkit::replay_cars(dir / "out");
  CHECK(r.exit_code == 0);
  CHECK(r.output.find("replayed 10 turns: 12 insights, 15 topics") != std::string::npos);
  for (const char* name : {"snapshot.json", "events.jsonl", "insights.json", "topics.json"}) {
    CAPTURE(name);
    CHECK(testkit::read_file(dir / "out" / name) == testkit::read_file(testkit::golden_path(std::string("cars/") + name)));
  }
  CHECK(testkit::fs::exists(dir / "out" / "transcript.fixture.json"));
}

TEST_CASE("replay reports an exhausted fixture") {
  auto bundle = testkit::read_json(testkit::fixture_path("cars/replay.json"));
  bundle["chat"]["analysis"].erase(bundle["chat"]["analysis"].end() - 1);
  testkit::TempDir dir;
  insightkit::write_text_file(dir / "short.json", bundle.dump());
  const auto r = testkit::replay_cars(dir / "out", dir / "short.json");
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("error: stopped at event seq ") != std::string::npos);
  CHECK(r.output.find("fixture exhausted: channel analysis") != std::string::npos);
}

TEST_CASE("extract prints a report") {
  testkit::TempDir dir;
  const auto r = run_cli("extract --transcript " + quote(testkit::fixture_path("evidence/turns.json")) + " --dataset " +
                         quote(testkit::fixture_path("cars/cars.csv")) + " --fixtures " +
                         quote(testkit::fixture_path("evidence/agents.json")) + " --out " + quote(dir / "out"));
  REQUIRE(r.exit_code == 0);
  const auto report = insightkit::json::parse(r.output);
  CHECK(report.at("counters").at("evidence_dropped") == 4);
  CHECK(report.at("insights") == 2);
  CHECK(testkit::read_json(dir / "out" / "report.json") == report);
}

TEST_CASE("evaluate prints exact ratios") {
  const auto snapshot = quote(testkit::fixture_path("eval/snapshot.json"));
  auto r = run_cli("evaluate --snapshot " + snapshot + " --labels " + quote(testkit::fixture_path("eval/labels.json")));
  REQUIRE(r.exit_code == 0);
  CHECK(r.output ==
        "coverage: 95/104 = 91.3%\n"
        "evidence_accuracy: 92/104 = 88.5%\n"
        "context_accuracy: 92/104 = 88.5%\n"
        "topic_accuracy: 95/104 = 91.3%\n");

  r = run_cli("evaluate --snapshot " + snapshot + " --labels " + quote(testkit::fixture_path("eval/labels_coverage.json")));
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("coverage: 9/10 = 90.0%\n") == 0);
  CHECK(r.output.find("evidence_accuracy: 0/0 = n/a\n") != std::string::npos);

  r = run_cli("evaluate --json --snapshot " + snapshot + " --labels " + quote(testkit::fixture_path("eval/labels.json")));
  REQUIRE(r.exit_code == 0);
  CHECK(insightkit::json::parse(r.output).at("coverage").at("percent") == "91.3");

  r = run_cli("evaluate --snapshot " + snapshot + " --labels " + quote(testkit::fixture_path("eval/labels_unknown.json")));
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("unknown insight \"i999\"") != std::string::npos);
}

TEST_CASE("argument errors") {
  CHECK(run_cli("").exit_code != 0);
  CHECK(run_cli("frobnicate").exit_code != 0);
  CHECK(run_cli("evaluate --snapshot /nonexistent --labels /nonexistent").exit_code != 0);
  CHECK(run_cli("replay --dataset " + quote(testkit::fixture_path("cars/cars.csv"))).exit_code != 0);
  const auto help = run_cli("--help");
  CHECK(help.exit_code == 0);
  for (const char* sub : {"replay", "extract", "evaluate", "serve"}) CHECK(help.output.find(sub) != std::string::npos);
}

TEST_CASE("a bad config file is reported") {
  testkit::TempDir dir;
  insightkit::write_text_file(dir / "config.json", R"({"organization": {"topic_threshold": "high"}})");
  const auto r = run_cli("--config " + quote(dir / "config.json") + " evaluate --snapshot " +
                         quote(testkit::fixture_path("eval/snapshot.json")) + " --labels " +
                         quote(testkit::fixture_path("eval/labels.json")));
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("error: ") == 0);
}
