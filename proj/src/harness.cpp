#include "dera/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "dera/corruption.hpp"
#include "dera/metrics.hpp"
#include "dera/strings.hpp"

namespace dera::harness {

namespace {

namespace fs = std::filesystem;

struct ItemRow {
  std::string task;
  std::string run_id;
  nlohmann::json data;
};

std::string sanitize(const std::string& text) {
  std::string out;
  for (char c : text) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '-' || c == '_';
    out += ok ? c : '_';
  }
  return out;
}

std::string env_or(const char* name, const std::string& fallback) {
  const char* value = std::getenv(name);
  return value && *value ? value : fallback;
}

/// Per-item JSONL writer; every event is flushed so a crash mid-run leaves
/// all earlier items complete.
class LogWriter {
 public:
  explicit LogWriter(const std::string& path) : out_(path, std::ios::trunc) {
    if (!out_) throw Error("cannot write run log: " + path);
  }

  void write(const engine::RunLogEvent& event) {
    out_ << engine::event_to_json(event).dump() << '\n';
    out_.flush();
  }

 private:
  std::ofstream out_;
};

void run_items(size_t count, int parallelism, const std::function<void(size_t)>& work) {
  if (parallelism <= 1 || count <= 1) {
    for (size_t i = 0; i < count; ++i) work(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> workers;
  const size_t worker_count = std::min<size_t>(static_cast<size_t>(parallelism), count);
  for (size_t t = 0; t < worker_count; ++t) {
    workers.emplace_back([&] {
      while (true) {
        const size_t index = next.fetch_add(1);
        if (index >= count) break;
        work(index);
      }
    });
  }
  for (auto& worker : workers) worker.join();
}

nlohmann::json aggregate_longform(const std::vector<const ItemRow*>& rows) {
  double scratchpad_sum = 0;
  std::map<std::string, int> terminations;
  for (const auto* row : rows) {
    scratchpad_sum += row->data.value("scratchpad_entries", 0.0);
    terminations[row->data.value("terminated_by", std::string("unknown"))] += 1;
  }
  return {{"mean_scratchpad_entries",
           rows.empty() ? 0.0 : scratchpad_sum / static_cast<double>(rows.size())},
          {"terminations", terminations}};
}

nlohmann::json aggregate_qa(const std::vector<const ItemRow*>& rows) {
  int judged = 0;
  int matches = 0;
  double similarity_sum = 0;
  int similarity_count = 0;
  for (const auto* row : rows) {
    if (row->data.contains("exact_match") && !row->data["exact_match"].is_null()) {
      ++judged;
      if (row->data["exact_match"].get<bool>()) ++matches;
    }
    if (row->data.contains("similarity") && !row->data["similarity"].is_null()) {
      similarity_sum += row->data["similarity"].get<double>();
      ++similarity_count;
    }
  }
  nlohmann::json out{{"judged", judged}};
  out["exact_match_rate"] =
      judged == 0 ? nlohmann::json(nullptr)
                  : nlohmann::json(static_cast<double>(matches) / judged);
  out["mean_similarity"] =
      similarity_count == 0 ? nlohmann::json(nullptr)
                            : nlohmann::json(similarity_sum / similarity_count);
  return out;
}

nlohmann::json aggregate_corrupt(const std::vector<const ItemRow*>& rows) {
  std::map<std::string, std::vector<const ItemRow*>> by_level;
  for (const auto* row : rows) {
    by_level[row->data.value("level", std::string("unknown"))].push_back(row);
  }
  nlohmann::json levels = nlohmann::json::object();
  for (const auto& [level, level_rows] : by_level) {
    double initial_sum = 0;
    double final_sum = 0;
    for (const auto* row : level_rows) {
      initial_sum += row->data.value("initial_f1", 0.0);
      final_sum += row->data.value("final_f1", 0.0);
    }
    const double n = static_cast<double>(level_rows.size());
    levels[level] = {{"items", level_rows.size()},
                     {"mean_initial_f1", initial_sum / n},
                     {"mean_final_f1", final_sum / n}};
  }
  return {{"levels", std::move(levels)}};
}

nlohmann::json aggregate_score(const std::vector<const ItemRow*>& rows) {
  double f1_sum = 0;
  double precision_sum = 0;
  double recall_sum = 0;
  for (const auto* row : rows) {
    f1_sum += row->data.value("f1", 0.0);
    precision_sum += row->data.value("precision", 0.0);
    recall_sum += row->data.value("recall", 0.0);
  }
  const double n = rows.empty() ? 1 : static_cast<double>(rows.size());
  return {{"mean_f1", f1_sum / n},
          {"mean_precision", precision_sum / n},
          {"mean_recall", recall_sum / n}};
}

std::string cell_text(const nlohmann::json& value) {
  if (value.is_string()) return value.get<std::string>();
  return value.dump();
}

/// Applies the batch similarity rule across a task group and builds the
/// per-task tables. Rows must already be sorted.
Report build_report(std::vector<ItemRow> rows, const std::map<std::string, size_t>& failures) {
  std::stable_sort(rows.begin(), rows.end(), [](const ItemRow& a, const ItemRow& b) {
    return a.task != b.task ? a.task < b.task : a.run_id < b.run_id;
  });

  std::map<std::string, std::vector<ItemRow*>> grouped;
  for (auto& row : rows) grouped[row.task].push_back(&row);
  std::map<std::string, size_t> all_tasks_failures = failures;
  for (const auto& [task, _] : grouped) all_tasks_failures.emplace(task, 0);

  for (auto& [task, task_rows] : grouped) {
    if (task != to_string(Task::qa_open) && task != to_string(Task::qa_mc)) continue;
    std::vector<double> raw;
    std::vector<ItemRow*> judged;
    for (auto* row : task_rows) {
      if (row->data.contains("similarity_raw") && !row->data["similarity_raw"].is_null()) {
        raw.push_back(row->data["similarity_raw"].get<double>());
        judged.push_back(row);
      }
    }
    const auto clamped = metrics::MetricSuite::clamp_similarity_batch(raw);
    for (size_t i = 0; i < judged.size(); ++i) {
      judged[i]->data["similarity"] = clamped[i];
    }
  }

  Report report;
  report.json = {{"format_version", 1}, {"tasks", nlohmann::json::object()}};
  std::string text;
  for (const auto& [task, task_failures] : all_tasks_failures) {
    std::vector<const ItemRow*> task_rows;
    if (grouped.count(task)) {
      task_rows.assign(grouped[task].begin(), grouped[task].end());
    }

    nlohmann::json rows_json = nlohmann::json::array();
    std::vector<std::string> columns = {"run_id"};
    for (const auto* row : task_rows) {
      nlohmann::json row_json = row->data;
      row_json["run_id"] = row->run_id;
      for (const auto& [key, _] : row_json.items()) {
        if (std::find(columns.begin(), columns.end(), key) == columns.end()) {
          columns.push_back(key);
        }
      }
      rows_json.push_back(std::move(row_json));
    }
    std::sort(columns.begin() + 1, columns.end());

    nlohmann::json aggregate;
    if (task == to_string(Task::qa_open) || task == to_string(Task::qa_mc)) {
      aggregate = aggregate_qa(task_rows);
    } else if (task == to_string(Task::corrupt_and_repair)) {
      aggregate = aggregate_corrupt(task_rows);
    } else if (task == to_string(Task::score)) {
      aggregate = aggregate_score(task_rows);
    } else {
      aggregate = aggregate_longform(task_rows);
    }

    report.json["tasks"][task] = {{"items", task_rows.size()},
                                  {"failures", task_failures},
                                  {"rows", rows_json},
                                  {"aggregate", aggregate}};

    text += "task " + task + ": items " + std::to_string(task_rows.size()) +
            ", failures " + std::to_string(task_failures) + "\n";
    std::vector<size_t> widths(columns.size());
    for (size_t c = 0; c < columns.size(); ++c) widths[c] = columns[c].size();
    std::vector<std::vector<std::string>> cells;
    for (const auto& row_json : rows_json) {
      std::vector<std::string> row_cells;
      for (size_t c = 0; c < columns.size(); ++c) {
        std::string cell = row_json.contains(columns[c]) ? cell_text(row_json[columns[c]]) : "";
        for (auto& ch : cell) {
          if (ch == '\n' || ch == '\t') ch = ' ';
        }
        widths[c] = std::max(widths[c], cell.size());
        row_cells.push_back(std::move(cell));
      }
      cells.push_back(std::move(row_cells));
    }
    auto pad = [](const std::string& value, size_t width) {
      return value + std::string(width - value.size(), ' ');
    };
    text += "  ";
    for (size_t c = 0; c < columns.size(); ++c) {
      text += pad(columns[c], widths[c]) + (c + 1 < columns.size() ? "  " : "");
    }
    text += "\n";
    for (const auto& row_cells : cells) {
      text += "  ";
      for (size_t c = 0; c < row_cells.size(); ++c) {
        text += pad(row_cells[c], widths[c]) + (c + 1 < row_cells.size() ? "  " : "");
      }
      text += "\n";
    }
    text += "  aggregate: " + aggregate.dump() + "\n\n";
  }
  if (all_tasks_failures.empty()) text = "no runs\n";
  report.text = text;
  return report;
}

struct RepairFixture {
  std::string id;
  datasets::Encounter encounter;
  datasets::StructuredSummary summary;
};

RepairFixture repair_fixture_from_json(const nlohmann::json& value) {
  RepairFixture fixture;
  if (!value.contains("format_version") || value["format_version"] != 1) {
    throw Error("fixture must declare format_version 1");
  }
  fixture.id = value.at("id").get<std::string>();
  fixture.encounter = datasets::encounter_from_json(value.at("encounter"));
  fixture.summary = datasets::summary_from_json(value.at("summary"));
  return fixture;
}

struct ScorePair {
  std::string id;
  datasets::StructuredSummary ground_truth;
  datasets::StructuredSummary predicted;
};

ScorePair score_pair_from_json(const nlohmann::json& value) {
  ScorePair pair;
  if (!value.contains("format_version") || value["format_version"] != 1) {
    throw Error("score pair must declare format_version 1");
  }
  pair.id = value.at("id").get<std::string>();
  pair.ground_truth = datasets::summary_from_json(value.at("ground_truth"));
  pair.predicted = datasets::summary_from_json(value.at("predicted"));
  return pair;
}

template <typename T, typename Fn>
std::vector<T> load_fixture_lines(const std::string& path, Fn parse) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read input: " + path);
  std::vector<T> records;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      records.push_back(parse(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw datasets::IngestError(line_number, e.what());
    }
  }
  return records;
}

nlohmann::json metric_json(const metrics::MetricReport& report) {
  return {{"tp_gt", report.tp_gt},   {"fn", report.fn},
          {"tp_pred", report.tp_pred}, {"fp", report.fp},
          {"recall", report.recall}, {"precision", report.precision},
          {"f1", report.f1}};
}

}  // namespace

const char* to_string(Task task) {
  switch (task) {
    case Task::summarize: return "summarize";
    case Task::careplan: return "careplan";
    case Task::qa_open: return "qa_open";
    case Task::qa_mc: return "qa_mc";
    case Task::corrupt_and_repair: return "corrupt_and_repair";
    case Task::score: return "score";
  }
  return "unknown";
}

Task task_from_string(const std::string& name) {
  for (const Task task : {Task::summarize, Task::careplan, Task::qa_open, Task::qa_mc,
                          Task::corrupt_and_repair, Task::score}) {
    if (name == to_string(task)) return task;
  }
  throw ConfigError("unknown task: " + name);
}

const char* to_string(BackendMode mode) {
  switch (mode) {
    case BackendMode::live: return "live";
    case BackendMode::scripted: return "scripted";
    case BackendMode::replay: return "replay";
    case BackendMode::record: return "record";
  }
  return "unknown";
}

BackendMode backend_mode_from_string(const std::string& name) {
  for (const BackendMode mode :
       {BackendMode::live, BackendMode::scripted, BackendMode::replay, BackendMode::record}) {
    if (name == to_string(mode)) return mode;
  }
  throw ConfigError("unknown backend mode: " + name);
}

void ExperimentConfig::validate() const {
  if (input_path.empty()) throw ConfigError("input path is required");
  if (output_dir.empty()) throw ConfigError("output directory is required");
  if (prompts_dir.empty()) throw ConfigError("prompts directory is required");
  if (parallelism < 1) throw ConfigError("parallelism must be at least 1");
  if (failure_threshold < 0 || failure_threshold > 1) {
    throw ConfigError("failure threshold must be in [0, 1]");
  }
  if ((backend == BackendMode::replay || backend == BackendMode::record) &&
      cassette_path.empty()) {
    throw ConfigError(std::string(to_string(backend)) + " backend requires a cassette path");
  }
}

std::shared_ptr<backend::Backend> make_backend(
    const ExperimentConfig& config, std::shared_ptr<backend::Backend> override_backend) {
  auto live = [&]() -> std::shared_ptr<backend::Backend> {
    if (override_backend) return override_backend;
    backend::LiveConfig live_config;
    live_config.base_url = !config.base_url.empty()
                               ? config.base_url
                               : env_or("DERA_BASE_URL",
                                        env_or("OPENAI_BASE_URL", "https://api.openai.com"));
    live_config.api_key = env_or("DERA_API_KEY", env_or("OPENAI_API_KEY", ""));
    live_config.requests_per_second = config.requests_per_second;
    if (live_config.api_key.empty()) {
      throw ConfigError("live backend needs DERA_API_KEY or OPENAI_API_KEY");
    }
    return std::make_shared<backend::LiveBackend>(live_config);
  };

  switch (config.backend) {
    case BackendMode::live:
      return live();
    case BackendMode::scripted:
      if (override_backend) return override_backend;
      if (config.cassette_path.empty()) {
        throw ConfigError("scripted backend requires a cassette path holding the script");
      }
      return backend::ScriptedBackend::from_file(config.cassette_path);
    case BackendMode::replay:
      return std::make_shared<backend::ReplayBackend>(config.cassette_path);
    case BackendMode::record:
      return std::make_shared<backend::RecordingBackend>(
          override_backend ? override_backend : live(), config.cassette_path);
  }
  throw ConfigError("unknown backend mode");
}

ExperimentSummary run_experiment(const ExperimentConfig& config,
                                 std::shared_ptr<backend::Backend> backend_override) {
  config.validate();
  const auto registry = prompts::PromptRegistry::load(config.prompts_dir);
  auto chat_backend = make_backend(config, std::move(backend_override));

  const bool deterministic =
      config.backend == BackendMode::scripted || config.backend == BackendMode::replay;
  const auto start = std::chrono::steady_clock::now();
  engine::Clock clock;
  if (!deterministic) {
    clock = [start] {
      return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    };
  }

  engine::EngineConfig engine_config;
  engine_config.registry = &registry;
  engine_config.backend = chat_backend;
  engine_config.model = config.model;
  engine_config.overrides = config.overrides;
  engine_config.clock = clock;
  const engine::Engine engine(engine_config);
  const metrics::MetricSuite suite(registry, *chat_backend, config.model);

  fs::create_directories(config.output_dir);
  const std::string task_name = to_string(config.task);

  std::mutex state_mutex;
  std::vector<ItemRow> rows;
  size_t failures = 0;
  std::vector<nlohmann::json> score_lines;

  auto add_row = [&](const std::string& run_id, nlohmann::json data) {
    std::lock_guard<std::mutex> lock(state_mutex);
    rows.push_back({task_name, run_id, std::move(data)});
  };
  auto add_failure = [&] {
    std::lock_guard<std::mutex> lock(state_mutex);
    ++failures;
  };

  /// Runs one item with its own log file; failures are logged and counted.
  auto with_item = [&](const std::string& run_id,
                       const std::function<nlohmann::json(engine::RunOptions&)>& body) {
    LogWriter writer(config.output_dir + "/" + sanitize(run_id) + ".jsonl");
    engine::RunOptions options;
    options.run_id = run_id;
    options.sink = [&writer](const engine::RunLogEvent& event) { writer.write(event); };
    try {
      nlohmann::json row = body(options);
      engine::RunLogEvent event;
      event.run_id = run_id;
      event.stage = "item";
      event.wall_time = clock ? clock() : 0;
      event.data = {{"task", task_name}, {"row", row}};
      writer.write(event);
      add_row(run_id, std::move(row));
    } catch (const std::exception& e) {
      engine::RunLogEvent event;
      event.run_id = run_id;
      event.stage = "item_failed";
      event.wall_time = clock ? clock() : 0;
      event.data = {{"task", task_name}, {"error", e.what()}};
      writer.write(event);
      add_failure();
    }
  };

  switch (config.task) {
    case Task::summarize:
    case Task::careplan: {
      const auto encounters = datasets::load_encounters(config.input_path);
      const auto task = config.task == Task::summarize ? engine::LongFormTask::summarization
                                                       : engine::LongFormTask::care_plan;
      run_items(encounters.size(), config.parallelism, [&](size_t index) {
        const auto& encounter = encounters[index];
        with_item(task_name + "-" + encounter.id, [&](engine::RunOptions& options) {
          const auto result = engine.run_longform(task, encounter, options);
          return nlohmann::json{
              {"terminated_by", to_string(result.transcript.terminated_by)},
              {"messages", result.transcript.messages.size()},
              {"scratchpad_entries", result.scratchpad.size()},
              {"final_equals_initial", result.final_output == result.initial_output}};
        });
      });
      break;
    }
    case Task::qa_open:
    case Task::qa_mc: {
      auto questions = datasets::load_questions(config.input_path);
      if (config.sample) {
        questions = datasets::sample_questions(questions, *config.sample, config.seed);
      }
      const auto mode = config.task == Task::qa_open ? engine::QaMode::open_ended
                                                     : engine::QaMode::multiple_choice;
      run_items(questions.size(), config.parallelism, [&](size_t index) {
        const auto& question = questions[index];
        with_item(task_name + "-" + question.id, [&](engine::RunOptions& options) {
          const auto result = engine.run_qa(question, mode, options);
          const std::string gold = mode == engine::QaMode::multiple_choice
                                       ? question.gold_letter.value_or(question.gold_text)
                                       : question.gold_text;
          nlohmann::json row{{"top_vote", result.tally.top().text},
                             {"final_answer", result.final_answer},
                             {"gold", gold},
                             {"exact_match", nullptr},
                             {"similarity_raw", nullptr}};
          if (!gold.empty()) {
            const auto verdict = suite.exact_match_judge(result.final_answer, gold);
            row["exact_match"] = verdict.match;
            row["similarity_raw"] = suite.similarity_raw(result.final_answer, gold);
          }
          engine::RunLogEvent event;
          event.stage = "judges";
          event.data = {{"exact_match", row["exact_match"]},
                        {"similarity_raw", row["similarity_raw"]}};
          event.run_id = options.run_id;
          event.wall_time = clock ? clock() : 0;
          options.sink(event);
          return row;
        });
      });
      break;
    }
    case Task::corrupt_and_repair: {
      const auto fixtures =
          load_fixture_lines<RepairFixture>(config.input_path, repair_fixture_from_json);
      std::vector<CorruptionLevel> levels;
      if (config.level) {
        levels.push_back(*config.level);
      } else {
        levels = {CorruptionLevel::low, CorruptionLevel::medium, CorruptionLevel::high};
      }
      std::vector<std::pair<size_t, CorruptionLevel>> jobs;
      for (const auto level : levels) {
        for (size_t i = 0; i < fixtures.size(); ++i) jobs.emplace_back(i, level);
      }
      run_items(jobs.size(), config.parallelism, [&](size_t index) {
        const auto& fixture = fixtures[jobs[index].first];
        const auto level = jobs[index].second;
        const std::string run_id =
            task_name + "-" + to_string(level) + "-" + fixture.id;
        with_item(run_id, [&](engine::RunOptions& options) {
          const auto corrupted =
              corruption::corrupt({fixture.summary, level}, registry, *chat_backend,
                                  config.model);
          {
            engine::RunLogEvent event;
            event.stage = "corrupt";
            event.prompt_id = prompts::PromptId::summ_corruption;
            event.rendered_prompt = corrupted.rendered_prompt;
            event.completions = {corrupted.completion};
            event.run_id = options.run_id;
            event.wall_time = clock ? clock() : 0;
            options.sink(event);
          }
          options.initial_override = datasets::summary_text(corrupted.summary);
          const auto repaired =
              engine.run_longform(engine::LongFormTask::summarization, fixture.encounter,
                                  options);
          const auto initial_report =
              suite.document_gpt_f1(fixture.summary, corrupted.summary);
          const auto final_report = suite.document_gpt_f1(
              fixture.summary, datasets::parse_summary_text(repaired.final_output));
          engine::RunLogEvent event;
          event.stage = "metrics";
          event.run_id = options.run_id;
          event.wall_time = clock ? clock() : 0;
          event.data = {{"initial", metric_json(initial_report.document)},
                        {"final", metric_json(final_report.document)}};
          options.sink(event);
          return nlohmann::json{
              {"level", to_string(level)},
              {"initial_f1", initial_report.document.f1},
              {"final_f1", final_report.document.f1},
              {"terminated_by", to_string(repaired.transcript.terminated_by)},
              {"scratchpad_entries", repaired.scratchpad.size()}};
        });
      });
      break;
    }
    case Task::score: {
      const auto pairs =
          load_fixture_lines<ScorePair>(config.input_path, score_pair_from_json);
      run_items(pairs.size(), config.parallelism, [&](size_t index) {
        const auto& pair = pairs[index];
        with_item(task_name + "-" + pair.id, [&](engine::RunOptions&) {
          const auto report = suite.document_gpt_f1(pair.ground_truth, pair.predicted);
          std::lock_guard<std::mutex> lock(state_mutex);
          for (const auto& section : report.sections) {
            nlohmann::json line = metric_json(section.report);
            line["doc_id"] = pair.id;
            line["section"] = section.section;
            score_lines.push_back(std::move(line));
          }
          nlohmann::json doc_line = metric_json(report.document);
          doc_line["doc_id"] = pair.id;
          doc_line["section"] = "document";
          score_lines.push_back(doc_line);
          return nlohmann::json{{"f1", report.document.f1},
                                {"precision", report.document.precision},
                                {"recall", report.document.recall}};
        });
      });
      std::sort(score_lines.begin(), score_lines.end(),
                [](const nlohmann::json& a, const nlohmann::json& b) {
                  const auto ka = a["doc_id"].get<std::string>() + "/" +
                                  a["section"].get<std::string>();
                  const auto kb = b["doc_id"].get<std::string>() + "/" +
                                  b["section"].get<std::string>();
                  return ka < kb;
                });
      std::ofstream scores(config.output_dir + "/scores.jsonl", std::ios::trunc);
      for (const auto& line : score_lines) scores << line.dump() << '\n';
      break;
    }
  }

  ExperimentSummary summary;
  {
    std::lock_guard<std::mutex> lock(state_mutex);
    summary.items = rows.size() + failures;
    summary.failures = failures;
    const auto built = build_report(rows, {{task_name, failures}});
    summary.report_json = built.json;
    summary.report_text = built.text;
  }
  std::ofstream json_out(config.output_dir + "/report.json", std::ios::trunc);
  json_out << summary.report_json.dump(2) << '\n';
  std::ofstream text_out(config.output_dir + "/report.txt", std::ios::trunc);
  text_out << summary.report_text;
  return summary;
}

Report report(const std::vector<std::string>& run_log_paths) {
  std::vector<std::string> paths = run_log_paths;
  std::sort(paths.begin(), paths.end());

  std::vector<ItemRow> rows;
  std::map<std::string, size_t> failures;
  for (const auto& path : paths) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read run log: " + path);
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
      ++line_number;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      engine::RunLogEvent event;
      try {
        event = engine::event_from_json(nlohmann::json::parse(line));
      } catch (const std::exception& e) {
        throw ReportError(path, line_number, e.what());
      }
      if (event.stage == "item") {
        rows.push_back({event.data.at("task").get<std::string>(), event.run_id,
                        event.data.at("row")});
      } else if (event.stage == "item_failed") {
        failures[event.data.at("task").get<std::string>()] += 1;
      }
    }
  }
  return build_report(std::move(rows), failures);
}

}  // namespace dera::harness
