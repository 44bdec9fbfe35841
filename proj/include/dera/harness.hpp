#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dera/backend.hpp"
#include "dera/datasets.hpp"
#include "dera/engine.hpp"
#include "dera/error.hpp"

namespace dera::harness {

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error(message) {}
};

/// A run-log line that cannot be parsed back into an event.
class ReportError : public Error {
 public:
  ReportError(const std::string& file, int line, const std::string& reason)
      : Error(file + " line " + std::to_string(line) + ": " + reason), line(line) {}
  int line;
};

enum class Task { summarize, careplan, qa_open, qa_mc, corrupt_and_repair, score };

const char* to_string(Task task);
Task task_from_string(const std::string& name);

enum class BackendMode { live, scripted, replay, record };

const char* to_string(BackendMode mode);
BackendMode backend_mode_from_string(const std::string& name);

struct ExperimentConfig {
  Task task = Task::summarize;
  BackendMode backend = BackendMode::scripted;
  std::string input_path;
  std::string output_dir;
  std::string cassette_path;
  std::string prompts_dir = "prompts";
  std::string model = "gpt-4";
  std::string base_url;  // empty falls back to env, then the default
  std::optional<CorruptionLevel> level;
  datasets::RewriteMode rewrite_mode = datasets::RewriteMode::last_sentence;
  int parallelism = 1;
  uint64_t seed = 0;
  std::optional<size_t> sample;
  double failure_threshold = 0;
  double requests_per_second = 0;
  engine::ParamOverrides overrides;

  void validate() const;
};

struct ExperimentSummary {
  size_t items = 0;
  size_t failures = 0;
  nlohmann::json report_json;
  std::string report_text;

  double failure_ratio() const {
    return items == 0 ? 0 : static_cast<double>(failures) / static_cast<double>(items);
  }
};

/// Runs one experiment over a corpus: per-item run logs land in the output
/// directory as <run_id>.jsonl next to report.json and report.txt. Item
/// failures are recorded and skipped. A backend passed by the caller
/// replaces the one the config would build (recording still wraps it).
ExperimentSummary run_experiment(const ExperimentConfig& config,
                                 std::shared_ptr<backend::Backend> backend_override = nullptr);

struct Report {
  nlohmann::json json;
  std::string text;
};

/// Rebuilds the aggregate report from run-log files. Ordering is
/// deterministic: tasks and rows sort lexicographically.
Report report(const std::vector<std::string>& run_log_paths);

/// Backend built from config and environment (api key, base url).
std::shared_ptr<backend::Backend> make_backend(
    const ExperimentConfig& config, std::shared_ptr<backend::Backend> override_backend = nullptr);

}  // namespace dera::harness
