#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dera/backend.hpp"
#include "dera/datasets.hpp"
#include "dera/error.hpp"
#include "dera/prompts.hpp"
#include "dera/types.hpp"

namespace dera::engine {

/// A Decider reply with no parseable ACCEPT or REJECT line.
class UnparseableDecision : public Error {
 public:
  explicit UnparseableDecision(const std::string& message) : Error(message) {}
};

/// A multiple-choice answer outside the question's options map.
class InvalidChoiceLetter : public Error {
 public:
  explicit InvalidChoiceLetter(const std::string& message) : Error(message) {}
};

/// Lines beginning "ACCEPT:" or "REJECT:" become decisions, in order.
/// Tagged lines with empty text are ignored. No decision at all throws
/// UnparseableDecision.
std::vector<DeciderDecision> parse_decider_reply(const std::string& reply);

/// True when any line of the reply is exactly "[DONE]".
bool is_termination_reply(const std::string& reply);

/// The "ANSWER: <text>" line of a reply, when present.
std::optional<std::string> parse_answer_line(const std::string& reply);

struct RunLogEvent {
  std::string run_id;
  std::string stage;
  std::optional<prompts::PromptId> prompt_id;
  std::string rendered_prompt;
  std::vector<std::string> completions;
  std::vector<DeciderDecision> decisions;
  std::vector<std::string> scratchpad_snapshot;
  double wall_time = 0;
  nlohmann::json data = nlohmann::json::object();
};

nlohmann::json event_to_json(const RunLogEvent& event);
RunLogEvent event_from_json(const nlohmann::json& value);

using RunLogSink = std::function<void(const RunLogEvent&)>;
using Clock = std::function<double()>;

/// Optional per-prompt parameter overrides applied on top of the registry.
struct ParamOverrides {
  std::optional<double> temperature;
  std::optional<double> top_p;
  std::optional<double> frequency_penalty;
  std::optional<int> max_tokens;
  std::optional<int> num_completions;

  GenerationParams apply(GenerationParams params) const;
};

struct EngineConfig {
  const prompts::PromptRegistry* registry = nullptr;
  std::shared_ptr<backend::Backend> backend;
  std::string model = "gpt-4";
  ParamOverrides overrides;
  Clock clock;  // unset means wall_time 0
};

struct RunOptions {
  std::string run_id;
  RunLogSink sink;  // unset discards events
  std::optional<std::string> initial_override;
};

enum class LongFormTask { summarization, care_plan };

const char* to_string(LongFormTask task);

struct LongFormRunResult {
  LongFormTask task = LongFormTask::summarization;
  std::string initial_output;
  DialogTranscript transcript;
  Scratchpad scratchpad;
  std::string final_output;
};

/// A run that failed mid-dialog; the partial result keeps the transcript
/// with terminated_by set to the error termination.
class LongFormAborted : public Error {
 public:
  LongFormAborted(const std::string& message, LongFormRunResult partial)
      : Error(message), partial(std::move(partial)) {}
  LongFormRunResult partial;
};

enum class QaMode { open_ended, multiple_choice };

const char* to_string(QaMode mode);

struct QaRunResult {
  QaMode mode = QaMode::open_ended;
  std::string question_text;
  VoteTally tally;
  std::string initial_decider_message;
  DialogTranscript transcript;
  std::vector<std::string> final_completions;
  std::string final_answer;
};

class QaAborted : public Error {
 public:
  QaAborted(const std::string& message, QaRunResult partial)
      : Error(message), partial(std::move(partial)) {}
  QaRunResult partial;
};

/// Runs the two-agent refinement protocols against a chat backend.
class Engine {
 public:
  explicit Engine(EngineConfig config);

  /// Drafts long-form output, refines it over the agent dialog within the
  /// turn budget, and regenerates it from the draft plus the scratchpad.
  /// An initial_override in the options replaces the drafting call.
  LongFormRunResult run_longform(LongFormTask task, const datasets::Encounter& input,
                                 const RunOptions& options = {}) const;

  /// Opening Decider message reasoning over the vote distribution; each
  /// answer form appears with its vote share.
  std::string initial_decider_message(const std::string& question, const VoteTally& tally,
                                      const RunOptions& options = {}) const;

  /// Short-form pipeline: sampled answers, vote tally, bounded dialog,
  /// final vote over completions given the full chat history.
  QaRunResult run_qa(const datasets::ExamQuestion& question, QaMode mode,
                     const RunOptions& options = {}) const;

  /// Option-bound stem rendered with its options and a letter instruction.
  static std::string multiple_choice_text(const datasets::ExamQuestion& question);

 private:
  struct CallResult {
    std::vector<std::string> completions;
    std::string rendered_prompt;
  };

  CallResult call_prompt(prompts::PromptId id, const std::string& rendered,
                         std::vector<backend::WireMessage> messages) const;
  void emit(const RunOptions& options, RunLogEvent event) const;
  std::string render_vars(prompts::PromptId id, const prompts::VarMap& vars) const;

  EngineConfig config_;
};

}  // namespace dera::engine
