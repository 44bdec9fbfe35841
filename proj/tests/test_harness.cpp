#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <memory>

#include "dera/harness.hpp"
#include "dera/voting.hpp"
#include "support/oracle_backend.hpp"
#include "support/test_util.hpp"

using namespace dera;
using namespace dera::harness;

namespace {

void write_jsonl(const std::string& path, const std::vector<nlohmann::json>& lines) {
  std::ofstream out(path, std::ios::trunc);
  for (const auto& line : lines) out << line.dump() << '\n';
}

ExperimentConfig base_config(const testutil::TempDir& dir) {
  ExperimentConfig config;
  config.prompts_dir = DERA_PROMPTS_DIR;
  config.input_path = dir.file("input.jsonl");
  config.output_dir = dir.file("out");
  return config;
}

void enqueue_summarize_run(testutil::CapturingBackend& backend) {
  backend.enqueue({"Draft summary about the visit."});
  backend.enqueue({"The fever from yesterday is missing."});
  backend.enqueue({"ACCEPT: Add the low fever under Pertinent Positives."});
  backend.enqueue({"[DONE]"});
  backend.enqueue({"Revised summary with the fever noted."});
}

std::vector<engine::RunLogEvent> read_log(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::vector<engine::RunLogEvent> events;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    events.push_back(engine::event_from_json(nlohmann::json::parse(line)));
  }
  return events;
}

}  // namespace

TEST_CASE("task and backend mode names round-trip") {
  for (const Task task : {Task::summarize, Task::careplan, Task::qa_open, Task::qa_mc,
                          Task::corrupt_and_repair, Task::score}) {
    CHECK(task_from_string(to_string(task)) == task);
  }
  for (const BackendMode mode :
       {BackendMode::live, BackendMode::scripted, BackendMode::replay, BackendMode::record}) {
    CHECK(backend_mode_from_string(to_string(mode)) == mode);
  }
  CHECK_THROWS_AS(task_from_string("summarise"), ConfigError);
  CHECK_THROWS_AS(backend_mode_from_string("cassette"), ConfigError);
}

TEST_CASE("config validation rejects incomplete setups") {
  testutil::TempDir dir;
  ExperimentConfig config = base_config(dir);
  CHECK_NOTHROW(config.validate());

  SUBCASE("missing input") {
    config.input_path.clear();
    CHECK_THROWS_AS(config.validate(), ConfigError);
  }
  SUBCASE("missing output") {
    config.output_dir.clear();
    CHECK_THROWS_AS(config.validate(), ConfigError);
  }
  SUBCASE("missing prompts") {
    config.prompts_dir.clear();
    CHECK_THROWS_AS(config.validate(), ConfigError);
  }
  SUBCASE("bad parallelism") {
    config.parallelism = 0;
    CHECK_THROWS_AS(config.validate(), ConfigError);
  }
  SUBCASE("threshold out of range") {
    config.failure_threshold = 1.5;
    CHECK_THROWS_AS(config.validate(), ConfigError);
  }
  SUBCASE("replay without a cassette") {
    config.backend = BackendMode::replay;
    CHECK_THROWS_AS(config.validate(), ConfigError);
  }
  SUBCASE("record without a cassette") {
    config.backend = BackendMode::record;
    CHECK_THROWS_AS(config.validate(), ConfigError);
  }
}

TEST_CASE("backends are built to match the mode") {
  testutil::TempDir dir;
  ExperimentConfig config = base_config(dir);
  auto override_backend = std::make_shared<testutil::CapturingBackend>();

  SUBCASE("an override replaces the scripted source") {
    config.backend = BackendMode::scripted;
    CHECK(make_backend(config, override_backend) == override_backend);
  }
  SUBCASE("scripted mode needs a script file") {
    config.backend = BackendMode::scripted;
    CHECK_THROWS_AS(make_backend(config), ConfigError);
  }
  SUBCASE("scripted mode loads the script") {
    config.backend = BackendMode::scripted;
    config.cassette_path = dir.file("script.jsonl");
    testutil::write_file(config.cassette_path, "[\"hello\"]\n");
    auto built = make_backend(config);
    backend::ChatRequest request;
    request.model = "gpt-4";
    request.messages = {{backend::WireRole::user, "hi"}};
    CHECK(built->complete(request) == std::vector<std::string>{"hello"});
  }
  SUBCASE("replay mode reads the cassette") {
    config.backend = BackendMode::replay;
    config.cassette_path = dir.file("cassette.jsonl");
    testutil::write_file(config.cassette_path, "");
    auto built = make_backend(config);
    CHECK(dynamic_cast<backend::ReplayBackend*>(built.get()) != nullptr);
  }
  SUBCASE("record mode wraps the override and truncates the cassette") {
    config.backend = BackendMode::record;
    config.cassette_path = dir.file("cassette.jsonl");
    testutil::write_file(config.cassette_path, "stale line\n");
    auto built = make_backend(config, override_backend);
    CHECK(dynamic_cast<backend::RecordingBackend*>(built.get()) != nullptr);
    CHECK(testutil::read_file(config.cassette_path).empty());
  }
  SUBCASE("live mode needs an api key") {
    ::unsetenv("DERA_API_KEY");
    ::unsetenv("OPENAI_API_KEY");
    config.backend = BackendMode::live;
    CHECK_THROWS_AS(make_backend(config), ConfigError);
    ::setenv("DERA_API_KEY", "test-key", 1);
    auto built = make_backend(config);
    CHECK(dynamic_cast<backend::LiveBackend*>(built.get()) != nullptr);
    ::unsetenv("DERA_API_KEY");
  }
}

TEST_CASE("a summarize experiment writes logs, rows, and reports") {
  testutil::TempDir dir;
  ExperimentConfig config = base_config(dir);
  config.task = Task::summarize;
  write_jsonl(config.input_path, {datasets::encounter_to_json(testutil::sample_encounter())});

  auto backend = std::make_shared<testutil::CapturingBackend>();
  enqueue_summarize_run(*backend);

  const auto summary = run_experiment(config, backend);
  CHECK(summary.items == 1);
  CHECK(summary.failures == 0);
  CHECK(summary.failure_ratio() == 0);

  const auto& row = summary.report_json["tasks"]["summarize"]["rows"][0];
  CHECK(row["run_id"] == "summarize-enc-001");
  CHECK(row["terminated_by"] == "researcher_done");
  CHECK(row["messages"] == 3);
  CHECK(row["scratchpad_entries"] == 1);
  CHECK(row["final_equals_initial"] == false);
  CHECK(summary.report_json["format_version"] == 1);
  CHECK(summary.report_text.find("task summarize: items 1, failures 0") !=
        std::string::npos);

  const auto events = read_log(dir.file("out/summarize-enc-001.jsonl"));
  std::vector<std::string> stages;
  for (const auto& event : events) {
    stages.push_back(event.stage);
    CHECK(event.wall_time == 0);
    CHECK(event.run_id == "summarize-enc-001");
  }
  CHECK(stages == std::vector<std::string>{"initial", "researcher_turn_1",
                                           "decider_turn_1", "researcher_turn_2",
                                           "final", "result", "item"});

  CHECK(nlohmann::json::parse(testutil::read_file(dir.file("out/report.json"))) ==
        summary.report_json);
  CHECK(testutil::read_file(dir.file("out/report.txt")) == summary.report_text);
}

TEST_CASE("identical scripted runs produce identical bytes") {
  testutil::TempDir dir;
  std::string first_log;
  std::string first_report;
  for (int i = 0; i < 2; ++i) {
    ExperimentConfig config = base_config(dir);
    config.task = Task::summarize;
    config.output_dir = dir.file("out" + std::to_string(i));
    write_jsonl(config.input_path,
                {datasets::encounter_to_json(testutil::sample_encounter())});
    auto backend = std::make_shared<testutil::CapturingBackend>();
    enqueue_summarize_run(*backend);
    run_experiment(config, backend);
    const auto log = testutil::read_file(config.output_dir + "/summarize-enc-001.jsonl");
    const auto report = testutil::read_file(config.output_dir + "/report.json");
    if (i == 0) {
      first_log = log;
      first_report = report;
    } else {
      CHECK(log == first_log);
      CHECK(report == first_report);
    }
  }
}

TEST_CASE("qa runs attach judge verdicts and the batch-clamped similarity") {
  testutil::TempDir dir;
  ExperimentConfig config = base_config(dir);
  config.task = Task::qa_open;

  datasets::ExamQuestion judged;
  judged.id = "q-1";
  judged.stem = "Which design tops the evidence hierarchy?";
  judged.gold_text = "meta-analysis";
  datasets::ExamQuestion unjudged;
  unjudged.id = "q-2";
  unjudged.stem = "Name a study design.";
  unjudged.gold_text = "";
  write_jsonl(config.input_path,
              {datasets::question_to_json(judged), datasets::question_to_json(unjudged)});

  auto backend = std::make_shared<testutil::CapturingBackend>();
  backend->enqueue({"Meta-analysis", "Meta-analysis", "Case report", "Meta-analysis",
                    "Cohort study"});
  backend->enqueue({"The tally favors Meta-analysis."});
  backend->enqueue({"[DONE]"});
  backend->enqueue({"Meta-analysis", "Meta-analysis", "Systematic review",
                    "Meta-analysis", "Meta-analysis"});
  backend->enqueue({"Yes, both name the same design."});
  backend->enqueue({"0.85"});
  backend->enqueue({"Case series", "Case series", "Case report", "Case series",
                    "Case series"});
  backend->enqueue({"The tally favors Case series."});
  backend->enqueue({"[DONE]"});
  backend->enqueue({"Case series", "Case series", "Case series", "Case series",
                    "Case series"});

  const auto summary = run_experiment(config, backend);
  CHECK(summary.items == 2);
  CHECK(backend->remaining() == 0);

  const auto& task_report = summary.report_json["tasks"]["qa_open"];
  const auto& first = task_report["rows"][0];
  CHECK(first["run_id"] == "qa_open-q-1");
  CHECK(first["top_vote"] == "Meta-analysis");
  CHECK(first["final_answer"] == "Meta-analysis");
  CHECK(first["gold"] == "meta-analysis");
  CHECK(first["exact_match"] == true);
  CHECK(first["similarity_raw"] == 0.85);
  CHECK(first["similarity"] == 0.85);
  const auto& second = task_report["rows"][1];
  CHECK(second["exact_match"].is_null());
  CHECK(second["similarity_raw"].is_null());
  CHECK(!second.contains("similarity"));

  CHECK(task_report["aggregate"]["judged"] == 1);
  CHECK(task_report["aggregate"]["exact_match_rate"] == 1.0);
  CHECK(task_report["aggregate"]["mean_similarity"] == 0.85);

  const auto events = read_log(dir.file("out/qa_open-q-1.jsonl"));
  bool saw_judges = false;
  for (const auto& event : events) {
    if (event.stage == "judges") {
      saw_judges = true;
      CHECK(event.data["exact_match"] == true);
      CHECK(event.data["similarity_raw"] == 0.85);
    }
  }
  CHECK(saw_judges);
}

TEST_CASE("stray similarity scores zero out together at report time") {
  testutil::TempDir dir;
  ExperimentConfig config = base_config(dir);
  config.task = Task::qa_open;

  datasets::ExamQuestion question;
  question.stem = "Name the design.";
  question.gold_text = "cohort";
  std::vector<nlohmann::json> lines;
  for (int i = 0; i < 2; ++i) {
    question.id = "q-" + std::to_string(i);
    lines.push_back(datasets::question_to_json(question));
  }
  write_jsonl(config.input_path, lines);

  auto backend = std::make_shared<testutil::CapturingBackend>();
  for (const char* score : {"0.9", "40.0"}) {
    backend->enqueue({"Cohort", "Cohort", "Cohort", "Cohort", "Cohort"});
    backend->enqueue({"Cohort it is."});
    backend->enqueue({"[DONE]"});
    backend->enqueue({"Cohort", "Cohort", "Cohort", "Cohort", "Cohort"});
    backend->enqueue({"No, the casing differs but the concept matches."});
    backend->enqueue({score});
  }

  const auto summary = run_experiment(config, backend);
  const auto& rows = summary.report_json["tasks"]["qa_open"]["rows"];
  CHECK(rows[0]["similarity_raw"] == 0.9);
  CHECK(rows[0]["similarity"] == 0.9);
  CHECK(rows[1]["similarity_raw"] == 40.0);
  CHECK(rows[1]["similarity"] == 0.0);
}

TEST_CASE("corrupt and repair measures the loss and the recovery") {
  testutil::TempDir dir;
  ExperimentConfig config = base_config(dir);
  config.task = Task::corrupt_and_repair;
  config.level = CorruptionLevel::medium;

  const auto ground_truth = testutil::summary_with_positives(
      {"Sore throat for three days.", "Painful swallowing.", "Low fever yesterday.",
       "Symptoms worse at night.", "Mild fatigue.", "Reduced appetite."});
  write_jsonl(config.input_path,
              {{{"format_version", 1},
                {"id", "fx-1"},
                {"encounter", datasets::encounter_to_json(testutil::sample_encounter())},
                {"summary", datasets::summary_to_json(ground_truth)}}});

  auto backend = std::make_shared<testutil::OracleBackend>();
  backend->expect_summary(ground_truth);

  const auto summary = run_experiment(config, backend);
  CHECK(summary.items == 1);
  CHECK(summary.failures == 0);

  const auto& row = summary.report_json["tasks"]["corrupt_and_repair"]["rows"][0];
  CHECK(row["run_id"] == "corrupt_and_repair-medium-fx-1");
  CHECK(row["level"] == "medium");
  CHECK(row["initial_f1"].get<double>() < 1.0);
  CHECK(row["final_f1"].get<double>() == doctest::Approx(1.0));
  CHECK(row["terminated_by"] == "researcher_done");
  CHECK(row["scratchpad_entries"].get<int>() == 5);

  const auto& aggregate = summary.report_json["tasks"]["corrupt_and_repair"]["aggregate"];
  CHECK(aggregate["levels"]["medium"]["items"] == 1);
  CHECK(aggregate["levels"]["medium"]["mean_final_f1"].get<double>() ==
        doctest::Approx(1.0));

  const auto events = read_log(dir.file("out/corrupt_and_repair-medium-fx-1.jsonl"));
  bool saw_corrupt = false;
  bool saw_metrics = false;
  for (const auto& event : events) {
    if (event.stage == "corrupt") {
      saw_corrupt = true;
      CHECK(event.prompt_id == prompts::PromptId::summ_corruption);
    }
    if (event.stage == "metrics") {
      saw_metrics = true;
      CHECK(event.data["final"]["f1"].get<double>() == doctest::Approx(1.0));
    }
  }
  CHECK(saw_corrupt);
  CHECK(saw_metrics);
}

TEST_CASE("the score task writes per-section score lines") {
  testutil::TempDir dir;
  ExperimentConfig config = base_config(dir);
  config.task = Task::score;

  const auto ground_truth =
      testutil::summary_with_positives({"Fever.", "Cough.", "Night sweats."});
  auto predicted = ground_truth;
  predicted.pertinent_positives = "Fever.\nCough.";
  write_jsonl(config.input_path, {{{"format_version", 1},
                                   {"id", "s-1"},
                                   {"ground_truth", datasets::summary_to_json(ground_truth)},
                                   {"predicted", datasets::summary_to_json(predicted)}}});

  auto backend = std::make_shared<testutil::OracleBackend>();
  const auto summary = run_experiment(config, backend);
  CHECK(summary.items == 1);

  const auto& row = summary.report_json["tasks"]["score"]["rows"][0];
  // gt holds 5 concepts, the prediction 4 of them, nothing extra
  CHECK(row["recall"].get<double>() == doctest::Approx(0.8));
  CHECK(row["precision"].get<double>() == doctest::Approx(1.0));
  CHECK(row["f1"].get<double>() == doctest::Approx(2 * 0.8 / 1.8));

  std::ifstream scores(dir.file("out/scores.jsonl"));
  REQUIRE(scores.good());
  std::vector<nlohmann::json> lines;
  std::string line;
  while (std::getline(scores, line)) {
    if (!line.empty()) lines.push_back(nlohmann::json::parse(line));
  }
  REQUIRE(lines.size() == 7);
  CHECK(lines[0]["section"] == "demographics_social");
  CHECK(lines[1]["section"] == "document");
  for (const auto& parsed : lines) CHECK(parsed["doc_id"] == "s-1");
  const auto document = std::find_if(lines.begin(), lines.end(), [](const nlohmann::json& l) {
    return l["section"] == "document";
  });
  REQUIRE(document != lines.end());
  CHECK((*document)["f1"].get<double>() == doctest::Approx(2 * 0.8 / 1.8));
}

TEST_CASE("item failures are counted, logged, and survive in the report") {
  testutil::TempDir dir;
  ExperimentConfig config = base_config(dir);
  config.task = Task::summarize;

  auto second = testutil::sample_encounter();
  second.id = "enc-002";
  write_jsonl(config.input_path, {datasets::encounter_to_json(testutil::sample_encounter()),
                                  datasets::encounter_to_json(second)});

  auto backend = std::make_shared<testutil::CapturingBackend>();
  enqueue_summarize_run(*backend);

  const auto summary = run_experiment(config, backend);
  CHECK(summary.items == 2);
  CHECK(summary.failures == 1);
  CHECK(summary.failure_ratio() == 0.5);
  CHECK(summary.report_json["tasks"]["summarize"]["items"] == 1);
  CHECK(summary.report_json["tasks"]["summarize"]["failures"] == 1);

  const auto events = read_log(dir.file("out/summarize-enc-002.jsonl"));
  REQUIRE(!events.empty());
  CHECK(events.back().stage == "item_failed");
  CHECK(events.back().data["task"] == "summarize");
  CHECK(!events.back().data["error"].get<std::string>().empty());
}

TEST_CASE("a report rebuilt from run logs matches the live one") {
  testutil::TempDir dir;
  ExperimentConfig config = base_config(dir);
  config.task = Task::summarize;

  auto second = testutil::sample_encounter();
  second.id = "enc-002";
  write_jsonl(config.input_path, {datasets::encounter_to_json(testutil::sample_encounter()),
                                  datasets::encounter_to_json(second)});

  auto backend = std::make_shared<testutil::CapturingBackend>();
  enqueue_summarize_run(*backend);
  enqueue_summarize_run(*backend);

  const auto summary = run_experiment(config, backend);
  CHECK(summary.failures == 0);

  const auto rebuilt = report({dir.file("out/summarize-enc-002.jsonl"),
                               dir.file("out/summarize-enc-001.jsonl")});
  CHECK(rebuilt.json == summary.report_json);
  CHECK(rebuilt.text == summary.report_text);
}

TEST_CASE("a corrupt run-log line is reported with its position") {
  testutil::TempDir dir;
  engine::RunLogEvent event;
  event.run_id = "summarize-x";
  event.stage = "item";
  event.data = {{"task", "summarize"}, {"row", {{"messages", 3}}}};
  const auto path = dir.file("broken.jsonl");
  testutil::write_file(path, engine::event_to_json(event).dump() + "\n{not json\n");

  try {
    report({path});
    FAIL("expected ReportError");
  } catch (const ReportError& e) {
    CHECK(e.line == 2);
    CHECK(std::string(e.what()).find(path) != std::string::npos);
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }

  CHECK_THROWS_AS(report({dir.file("missing.jsonl")}), Error);
}

TEST_CASE("an empty report renders a placeholder") {
  const auto empty = report({});
  CHECK(empty.text == "no runs\n");
  CHECK(empty.json["tasks"].empty());
}
