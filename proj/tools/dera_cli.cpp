#include <cstdio>
#include <exception>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dera/corruption.hpp"
#include "dera/datasets.hpp"
#include "dera/harness.hpp"

namespace {

using dera::harness::ConfigError;
using dera::harness::ExperimentConfig;

struct RunFlags {
  ExperimentConfig config;
  std::string task = "summarize";
  std::string backend;
  std::string level;
  std::optional<double> temperature;
  std::optional<double> top_p;
  std::optional<double> frequency_penalty;
  std::optional<int> max_tokens;
  std::optional<int> num_completions;
  long long sample = -1;
};

void add_common_flags(CLI::App* app, RunFlags& flags) {
  app->add_option("--task", flags.task,
                  "summarize, careplan, qa_open, qa_mc, corrupt_and_repair, or score");
  app->add_option("--input", flags.config.input_path, "input corpus (JSONL)")->required();
  app->add_option("--output", flags.config.output_dir, "directory for run logs and reports")
      ->required();
  app->add_option("--cassette", flags.config.cassette_path, "cassette file (JSONL)");
  app->add_option("--prompts", flags.config.prompts_dir, "prompt registry directory");
  app->add_option("--model", flags.config.model, "model name sent to the backend");
  app->add_option("--base-url", flags.config.base_url, "chat API base url");
  app->add_option("--level", flags.level, "corruption level: low, medium, or high");
  app->add_option("--parallelism", flags.config.parallelism, "worker threads");
  app->add_option("--seed", flags.config.seed, "sampling seed");
  app->add_option("--sample", flags.sample, "sample this many questions");
  app->add_option("--failure-threshold", flags.config.failure_threshold,
                  "exit 2 when the failure ratio exceeds this");
  app->add_option("--rps", flags.config.requests_per_second,
                  "live request rate limit, requests per second");
  app->add_option("--temperature", flags.temperature, "override sampling temperature");
  app->add_option("--top-p", flags.top_p, "override nucleus sampling mass");
  app->add_option("--frequency-penalty", flags.frequency_penalty,
                  "override frequency penalty");
  app->add_option("--max-tokens", flags.max_tokens, "override completion token cap");
  app->add_option("--num-completions", flags.num_completions,
                  "override completions per call");
}

ExperimentConfig build_config(RunFlags& flags) {
  flags.config.task = dera::harness::task_from_string(flags.task);
  if (!flags.backend.empty()) {
    flags.config.backend = dera::harness::backend_mode_from_string(flags.backend);
  }
  if (!flags.level.empty()) {
    flags.config.level = dera::corruption_level_from_string(flags.level);
  }
  if (flags.sample >= 0) flags.config.sample = static_cast<size_t>(flags.sample);
  flags.config.overrides.temperature = flags.temperature;
  flags.config.overrides.top_p = flags.top_p;
  flags.config.overrides.frequency_penalty = flags.frequency_penalty;
  flags.config.overrides.max_tokens = flags.max_tokens;
  flags.config.overrides.num_completions = flags.num_completions;
  flags.config.validate();
  return flags.config;
}

int run_and_report(RunFlags& flags) {
  const auto config = build_config(flags);
  const auto summary = dera::harness::run_experiment(config);
  std::cout << summary.report_text;
  std::cout << "items " << summary.items << ", failures " << summary.failures << "\n";
  if (summary.items > 0 && summary.failure_ratio() > config.failure_threshold) {
    std::cerr << "failure ratio " << summary.failure_ratio() << " exceeds threshold "
              << config.failure_threshold << "\n";
    return 2;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-agent dialog refinement over a chat-completions backend"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto* run = app.add_subcommand("run", "run a task over a corpus");
  add_common_flags(run, run_flags);
  run->add_option("--backend", run_flags.backend, "live, scripted, replay, or record");

  RunFlags record_flags;
  auto* record = app.add_subcommand("record", "run against the live API, recording a cassette");
  add_common_flags(record, record_flags);

  RunFlags replay_flags;
  auto* replay = app.add_subcommand("replay", "re-run from a recorded cassette");
  add_common_flags(replay, replay_flags);

  RunFlags corrupt_flags;
  auto* corrupt = app.add_subcommand("corrupt", "corrupt summaries, then repair them");
  add_common_flags(corrupt, corrupt_flags);
  corrupt->add_option("--backend", corrupt_flags.backend, "live, scripted, replay, or record");

  std::string rewrite_input;
  std::string rewrite_output;
  std::string rewrite_mode = "last_sentence";
  std::string rewrite_prompts = "prompts";
  std::string rewrite_model = "gpt-4";
  std::string rewrite_backend = "live";
  std::string rewrite_cassette;
  std::string rewrite_base_url;
  auto* rewrite = app.add_subcommand("rewrite", "rewrite option-bound stems as open questions");
  rewrite->add_option("--input", rewrite_input, "question corpus (JSONL)")->required();
  rewrite->add_option("--output", rewrite_output, "rewritten corpus (JSONL)")->required();
  rewrite->add_option("--mode", rewrite_mode, "last_sentence or full");
  rewrite->add_option("--prompts", rewrite_prompts, "prompt registry directory");
  rewrite->add_option("--model", rewrite_model, "model name sent to the backend");
  rewrite->add_option("--backend", rewrite_backend, "live, scripted, replay, or record");
  rewrite->add_option("--cassette", rewrite_cassette, "cassette file (JSONL)");
  rewrite->add_option("--base-url", rewrite_base_url, "chat API base url");

  RunFlags score_flags;
  auto* score = app.add_subcommand("score", "score predicted summaries against ground truth");
  add_common_flags(score, score_flags);
  score->add_option("--backend", score_flags.backend, "live, scripted, replay, or record");

  std::vector<std::string> report_logs;
  std::string report_output;
  auto* report = app.add_subcommand("report", "rebuild the aggregate report from run logs");
  report->add_option("logs", report_logs, "run log files (JSONL)")->required();
  report->add_option("--output", report_output, "directory for report.json and report.txt");

  try {
    app.parse(argc, argv);

    if (run->parsed()) return run_and_report(run_flags);
    if (record->parsed()) {
      record_flags.backend = "record";
      return run_and_report(record_flags);
    }
    if (replay->parsed()) {
      replay_flags.backend = "replay";
      return run_and_report(replay_flags);
    }
    if (corrupt->parsed()) {
      corrupt_flags.task = "corrupt_and_repair";
      return run_and_report(corrupt_flags);
    }
    if (score->parsed()) {
      score_flags.task = "score";
      return run_and_report(score_flags);
    }
    if (rewrite->parsed()) {
      ExperimentConfig config;
      config.backend = dera::harness::backend_mode_from_string(rewrite_backend);
      config.cassette_path = rewrite_cassette;
      config.input_path = rewrite_input;
      config.output_dir = ".";
      config.prompts_dir = rewrite_prompts;
      config.base_url = rewrite_base_url;
      const auto mode = dera::datasets::rewrite_mode_from_string(rewrite_mode);
      const auto registry = dera::prompts::PromptRegistry::load(config.prompts_dir);
      const auto backend = dera::harness::make_backend(config);
      const auto questions = dera::datasets::load_questions(rewrite_input);
      std::ofstream out(rewrite_output, std::ios::trunc);
      if (!out) throw ConfigError("cannot write output: " + rewrite_output);
      size_t rewritten = 0;
      for (const auto& question : questions) {
        const auto open = dera::datasets::rewrite_open_ended(question, mode, registry,
                                                             *backend, rewrite_model);
        if (open.open_ended_stem && *open.open_ended_stem != question.stem) ++rewritten;
        out << dera::datasets::question_to_json(open).dump() << '\n';
      }
      std::cout << "rewrote " << rewritten << " of " << questions.size() << " questions\n";
      return 0;
    }
    if (report->parsed()) {
      const auto built = dera::harness::report(report_logs);
      std::cout << built.text;
      if (!report_output.empty()) {
        std::ofstream json_out(report_output + "/report.json", std::ios::trunc);
        json_out << built.json.dump(2) << '\n';
        std::ofstream text_out(report_output + "/report.txt", std::ios::trunc);
        text_out << built.text;
      }
      return 0;
    }
    return 1;
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
