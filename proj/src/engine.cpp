#include "dera/engine.hpp"

#include "dera/strings.hpp"
#include "dera/voting.hpp"

namespace dera::engine {

namespace {

constexpr const char* kDoneSentinel = "[DONE]";
constexpr int kDefaultLongFormBudget = 15;
constexpr int kDefaultQaResearcherBudget = 3;

/// Maps the transcript into wire messages as seen by one agent: its own
/// messages become assistant turns, the other agent's become user turns.
std::vector<backend::WireMessage> dialog_messages(const std::string& system_prompt,
                                                  const DialogTranscript& transcript,
                                                  Role self) {
  std::vector<backend::WireMessage> messages;
  messages.push_back({backend::WireRole::system, system_prompt});
  for (const auto& message : transcript.messages) {
    messages.push_back({message.role == self ? backend::WireRole::assistant
                                             : backend::WireRole::user,
                        message.content});
  }
  return messages;
}

std::string chat_history_text(const DialogTranscript& transcript) {
  std::vector<std::string> blocks;
  for (const auto& message : transcript.messages) {
    const char* label =
        message.role == Role::agent_decider ? "Decider" : "Researcher";
    blocks.push_back(std::string(label) + ": " + message.content);
  }
  return join(blocks, "\n\n");
}

std::string votes_text(const VoteTally& tally) {
  std::vector<std::string> lines;
  for (const auto& entry : tally.entries) {
    lines.push_back(entry.text + " (" + format_percent(entry.count, tally.total()) + ")");
  }
  return join(lines, "\n");
}

std::string scratchpad_text(const Scratchpad& pad) {
  std::vector<std::string> lines;
  for (const auto& entry : pad.entries) lines.push_back("- " + entry);
  return join(lines, "\n");
}

struct LongFormPrompts {
  prompts::PromptId initial;
  prompts::PromptId researcher;
  prompts::PromptId decider;
  prompts::PromptId final_;
};

LongFormPrompts prompts_for(LongFormTask task) {
  if (task == LongFormTask::summarization) {
    return {prompts::PromptId::summ_initial, prompts::PromptId::summ_researcher,
            prompts::PromptId::summ_decider, prompts::PromptId::summ_final};
  }
  return {prompts::PromptId::cp_initial, prompts::PromptId::cp_researcher,
          prompts::PromptId::cp_decider, prompts::PromptId::cp_final};
}

prompts::VarMap encounter_vars(LongFormTask task, const datasets::Encounter& input) {
  prompts::VarMap vars{{"age", std::to_string(input.age)},
                       {"sex", input.sex},
                       {"dialog", datasets::dialog_text(input)}};
  if (task == LongFormTask::care_plan) {
    vars["reason_for_visit"] = input.reason_for_visit;
  }
  return vars;
}

}  // namespace

std::vector<DeciderDecision> parse_decider_reply(const std::string& reply) {
  std::vector<DeciderDecision> decisions;
  for (const auto& raw_line : split_lines(reply)) {
    const std::string line = trim(raw_line);
    DecisionKind kind;
    std::string text;
    if (line.starts_with("ACCEPT:")) {
      kind = DecisionKind::accept;
      text = trim(line.substr(7));
    } else if (line.starts_with("REJECT:")) {
      kind = DecisionKind::reject;
      text = trim(line.substr(7));
    } else {
      continue;
    }
    if (!text.empty()) decisions.push_back({kind, text});
  }
  if (decisions.empty()) {
    throw UnparseableDecision("reply holds no ACCEPT or REJECT line");
  }
  return decisions;
}

bool is_termination_reply(const std::string& reply) {
  for (const auto& line : split_lines(reply)) {
    if (trim(line) == kDoneSentinel) return true;
  }
  return false;
}

std::optional<std::string> parse_answer_line(const std::string& reply) {
  for (const auto& raw_line : split_lines(reply)) {
    const std::string line = trim(raw_line);
    if (line.starts_with("ANSWER:")) {
      const std::string answer = trim(line.substr(7));
      if (!answer.empty()) return answer;
    }
  }
  return std::nullopt;
}

nlohmann::json event_to_json(const RunLogEvent& event) {
  nlohmann::json decisions = nlohmann::json::array();
  for (const auto& decision : event.decisions) {
    decisions.push_back({{"kind", to_string(decision.kind)}, {"text", decision.text}});
  }
  nlohmann::json value{{"run_id", event.run_id},
                       {"stage", event.stage},
                       {"prompt_id", event.prompt_id ? nlohmann::json(to_string(*event.prompt_id))
                                                     : nlohmann::json(nullptr)},
                       {"rendered_prompt", event.rendered_prompt},
                       {"completions", event.completions},
                       {"decisions", std::move(decisions)},
                       {"scratchpad_snapshot", event.scratchpad_snapshot},
                       {"wall_time", event.wall_time}};
  if (!event.data.empty()) value["data"] = event.data;
  return value;
}

RunLogEvent event_from_json(const nlohmann::json& value) {
  RunLogEvent event;
  event.run_id = value.at("run_id").get<std::string>();
  event.stage = value.at("stage").get<std::string>();
  if (!value.at("prompt_id").is_null()) {
    event.prompt_id = prompts::prompt_id_from_string(value.at("prompt_id").get<std::string>());
  }
  event.rendered_prompt = value.at("rendered_prompt").get<std::string>();
  event.completions = value.at("completions").get<std::vector<std::string>>();
  for (const auto& decision : value.at("decisions")) {
    event.decisions.push_back(
        {decision.at("kind").get<std::string>() == "accept" ? DecisionKind::accept
                                                            : DecisionKind::reject,
         decision.at("text").get<std::string>()});
  }
  event.scratchpad_snapshot = value.at("scratchpad_snapshot").get<std::vector<std::string>>();
  event.wall_time = value.at("wall_time").get<double>();
  if (value.contains("data")) event.data = value.at("data");
  return event;
}

GenerationParams ParamOverrides::apply(GenerationParams params) const {
  if (temperature) params.temperature = *temperature;
  if (top_p) params.top_p = *top_p;
  if (frequency_penalty) params.frequency_penalty = *frequency_penalty;
  if (max_tokens) params.max_tokens = *max_tokens;
  if (num_completions) params.num_completions = *num_completions;
  return params;
}

const char* to_string(LongFormTask task) {
  return task == LongFormTask::summarization ? "summarization" : "care_plan";
}

const char* to_string(QaMode mode) {
  return mode == QaMode::open_ended ? "open_ended" : "multiple_choice";
}

Engine::Engine(EngineConfig config) : config_(std::move(config)) {
  if (!config_.registry) throw Error("engine needs a prompt registry");
  if (!config_.backend) throw Error("engine needs a backend");
}

std::string Engine::render_vars(prompts::PromptId id, const prompts::VarMap& vars) const {
  return config_.registry->render(id, vars);
}

Engine::CallResult Engine::call_prompt(prompts::PromptId id, const std::string& rendered,
                                       std::vector<backend::WireMessage> messages) const {
  backend::ChatRequest request;
  request.model = config_.model;
  request.messages = std::move(messages);
  request.params = config_.overrides.apply(config_.registry->params_for(id));
  return {config_.backend->complete(request), rendered};
}

void Engine::emit(const RunOptions& options, RunLogEvent event) const {
  if (!options.sink) return;
  event.run_id = options.run_id;
  event.wall_time = config_.clock ? config_.clock() : 0;
  options.sink(event);
}

LongFormRunResult Engine::run_longform(LongFormTask task, const datasets::Encounter& input,
                                       const RunOptions& options) const {
  const LongFormPrompts ids = prompts_for(task);
  const prompts::VarMap vars = encounter_vars(task, input);
  const int budget = config_.registry->params_for(ids.decider)
                         .turn_budget.value_or(kDefaultLongFormBudget);

  LongFormRunResult result;
  result.task = task;

  if (options.initial_override) {
    result.initial_output = *options.initial_override;
    RunLogEvent event;
    event.stage = "initial";
    event.data = {{"source", "provided"}};
    emit(options, std::move(event));
  } else {
    const std::string rendered = render_vars(ids.initial, vars);
    auto call = call_prompt(ids.initial, rendered,
                            {{backend::WireRole::user, rendered}});
    result.initial_output = trim(call.completions.at(0));
    RunLogEvent event;
    event.stage = "initial";
    event.prompt_id = ids.initial;
    event.rendered_prompt = rendered;
    event.completions = call.completions;
    emit(options, std::move(event));
  }

  result.transcript.append(Role::agent_decider, result.initial_output);
  result.transcript.terminated_by = Termination::error;

  const std::string researcher_prompt = render_vars(ids.researcher, vars);
  const std::string decider_prompt = render_vars(ids.decider, vars);

  try {
    int exchange = 0;
    while (true) {
      if (static_cast<int>(result.transcript.messages.size()) >= budget) {
        result.transcript.terminated_by = Termination::turn_budget;
        break;
      }
      ++exchange;

      auto researcher = call_prompt(
          ids.researcher, researcher_prompt,
          dialog_messages(researcher_prompt, result.transcript, Role::agent_researcher));
      const std::string researcher_reply = trim(researcher.completions.at(0));
      {
        RunLogEvent event;
        event.stage = "researcher_turn_" + std::to_string(exchange);
        event.prompt_id = ids.researcher;
        event.rendered_prompt = researcher_prompt;
        event.completions = researcher.completions;
        event.scratchpad_snapshot = result.scratchpad.entries;
        emit(options, std::move(event));
      }
      if (is_termination_reply(researcher_reply)) {
        result.transcript.terminated_by = Termination::researcher_done;
        break;
      }
      result.transcript.append(Role::agent_researcher, researcher_reply);
      if (static_cast<int>(result.transcript.messages.size()) >= budget) {
        result.transcript.terminated_by = Termination::turn_budget;
        break;
      }

      std::vector<DeciderDecision> decisions;
      std::string decider_reply;
      for (int attempt = 0;; ++attempt) {
        auto decider = call_prompt(
            ids.decider, decider_prompt,
            dialog_messages(decider_prompt, result.transcript, Role::agent_decider));
        decider_reply = trim(decider.completions.at(0));
        try {
          decisions = parse_decider_reply(decider_reply);
          break;
        } catch (const UnparseableDecision& e) {
          RunLogEvent event;
          event.stage = "decider_retry_" + std::to_string(exchange);
          event.prompt_id = ids.decider;
          event.completions = decider.completions;
          event.data = {{"error", e.what()}};
          emit(options, std::move(event));
          if (attempt >= 1) throw;
        }
      }
      result.transcript.append(Role::agent_decider, decider_reply);
      for (const auto& decision : decisions) {
        result.scratchpad = scratchpad_append(std::move(result.scratchpad), decision);
      }
      {
        RunLogEvent event;
        event.stage = "decider_turn_" + std::to_string(exchange);
        event.prompt_id = ids.decider;
        event.rendered_prompt = decider_prompt;
        event.completions = {decider_reply};
        event.decisions = decisions;
        event.scratchpad_snapshot = result.scratchpad.entries;
        emit(options, std::move(event));
      }
    }

    if (result.scratchpad.empty()) {
      result.final_output = result.initial_output;
      RunLogEvent event;
      event.stage = "final";
      event.scratchpad_snapshot = result.scratchpad.entries;
      event.data = {{"source", "initial"}};
      emit(options, std::move(event));
    } else {
      const std::string initial_var = ids.final_ == prompts::PromptId::summ_final
                                          ? "initial_summary"
                                          : "initial_care_plan";
      const std::string rendered =
          render_vars(ids.final_, {{initial_var, result.initial_output},
                                   {"scratchpad", scratchpad_text(result.scratchpad)}});
      auto final_call = call_prompt(ids.final_, rendered,
                                    {{backend::WireRole::user, rendered}});
      result.final_output = trim(final_call.completions.at(0));
      RunLogEvent event;
      event.stage = "final";
      event.prompt_id = ids.final_;
      event.rendered_prompt = rendered;
      event.completions = final_call.completions;
      event.scratchpad_snapshot = result.scratchpad.entries;
      emit(options, std::move(event));
    }
  } catch (const Error& e) {
    result.transcript.terminated_by = Termination::error;
    result.final_output = result.initial_output;
    RunLogEvent event;
    event.stage = "error";
    event.scratchpad_snapshot = result.scratchpad.entries;
    event.data = {{"error", e.what()}};
    emit(options, std::move(event));
    throw LongFormAborted(e.what(), std::move(result));
  }

  RunLogEvent event;
  event.stage = "result";
  event.scratchpad_snapshot = result.scratchpad.entries;
  event.data = {{"task", to_string(task)},
                {"terminated_by", to_string(result.transcript.terminated_by)},
                {"messages", result.transcript.messages.size()},
                {"scratchpad_entries", result.scratchpad.size()},
                {"final_equals_initial", result.final_output == result.initial_output}};
  emit(options, std::move(event));
  return result;
}

std::string Engine::initial_decider_message(const std::string& question,
                                            const VoteTally& tally,
                                            const RunOptions& options) const {
  if (tally.empty()) throw Error("vote tally must be non-empty");
  const std::string rendered =
      render_vars(prompts::PromptId::qa_student_exp,
                  {{"question", question}, {"votes", votes_text(tally)}});
  auto call = call_prompt(prompts::PromptId::qa_student_exp, rendered,
                          {{backend::WireRole::user, rendered}});
  const std::string message = trim(call.completions.at(0));
  RunLogEvent event;
  event.stage = "decider_initial";
  event.prompt_id = prompts::PromptId::qa_student_exp;
  event.rendered_prompt = rendered;
  event.completions = call.completions;
  emit(options, std::move(event));
  return message;
}

std::string Engine::multiple_choice_text(const datasets::ExamQuestion& question) {
  if (question.options.empty()) {
    throw Error("multiple-choice run needs an options map");
  }
  std::vector<std::string> lines;
  for (const auto& [letter, text] : question.options) {
    lines.push_back(letter + ". " + text);
  }
  return question.stem + "\n\nOptions:\n" + join(lines, "\n") +
         "\n\nAnswer with the letter of the correct option.";
}

QaRunResult Engine::run_qa(const datasets::ExamQuestion& question, QaMode mode,
                           const RunOptions& options) const {
  QaRunResult result;
  result.mode = mode;
  if (mode == QaMode::multiple_choice) {
    result.question_text = multiple_choice_text(question);
  } else {
    result.question_text = question.open_ended_stem.value_or(question.stem);
  }

  const std::string single_shot_rendered = render_vars(
      prompts::PromptId::qa_single_shot, {{"question", result.question_text}});
  auto single_shot = call_prompt(prompts::PromptId::qa_single_shot, single_shot_rendered,
                                 {{backend::WireRole::user, single_shot_rendered}});
  std::vector<std::string> trimmed;
  for (const auto& completion : single_shot.completions) trimmed.push_back(trim(completion));
  result.tally = vote_distribution(trimmed);
  {
    RunLogEvent event;
    event.stage = "single_shot";
    event.prompt_id = prompts::PromptId::qa_single_shot;
    event.rendered_prompt = single_shot_rendered;
    event.completions = single_shot.completions;
    nlohmann::json votes = nlohmann::json::array();
    for (const auto& entry : result.tally.entries) {
      votes.push_back({{"text", entry.text}, {"count", entry.count}});
    }
    event.data = {{"votes", std::move(votes)}};
    emit(options, std::move(event));
  }

  result.initial_decider_message =
      initial_decider_message(result.question_text, result.tally, options);
  result.transcript.append(Role::agent_decider, result.initial_decider_message);
  result.transcript.terminated_by = Termination::error;

  const int researcher_budget = config_.registry->params_for(prompts::PromptId::qa_teacher)
                                    .turn_budget.value_or(kDefaultQaResearcherBudget);
  const std::string researcher_prompt = render_vars(
      prompts::PromptId::qa_teacher, {{"question", result.question_text}});
  const std::string decider_prompt = render_vars(
      prompts::PromptId::qa_student, {{"question", result.question_text}});

  try {
    int researcher_turns = 0;
    while (true) {
      if (researcher_turns >= researcher_budget) {
        result.transcript.terminated_by = Termination::turn_budget;
        break;
      }
      auto researcher = call_prompt(
          prompts::PromptId::qa_teacher, researcher_prompt,
          dialog_messages(researcher_prompt, result.transcript, Role::agent_researcher));
      const std::string researcher_reply = trim(researcher.completions.at(0));
      {
        RunLogEvent event;
        event.stage = "researcher_turn_" + std::to_string(researcher_turns + 1);
        event.prompt_id = prompts::PromptId::qa_teacher;
        event.rendered_prompt = researcher_prompt;
        event.completions = researcher.completions;
        emit(options, std::move(event));
      }
      if (is_termination_reply(researcher_reply)) {
        result.transcript.terminated_by = Termination::researcher_done;
        break;
      }
      result.transcript.append(Role::agent_researcher, researcher_reply);
      ++researcher_turns;

      auto decider = call_prompt(
          prompts::PromptId::qa_student, decider_prompt,
          dialog_messages(decider_prompt, result.transcript, Role::agent_decider));
      const std::string decider_reply = trim(decider.completions.at(0));
      result.transcript.append(Role::agent_decider, decider_reply);
      {
        RunLogEvent event;
        event.stage = "decider_turn_" + std::to_string(researcher_turns);
        event.prompt_id = prompts::PromptId::qa_student;
        event.rendered_prompt = decider_prompt;
        event.completions = decider.completions;
        const auto answer = parse_answer_line(decider_reply);
        event.data = {{"answer", answer ? nlohmann::json(*answer) : nlohmann::json(nullptr)}};
        emit(options, std::move(event));
      }
    }

    const std::string final_rendered =
        render_vars(prompts::PromptId::qa_final,
                    {{"question", result.question_text},
                     {"chat_history", chat_history_text(result.transcript)}});
    auto final_call = call_prompt(prompts::PromptId::qa_final, final_rendered,
                                  {{backend::WireRole::user, final_rendered}});
    for (const auto& completion : final_call.completions) {
      result.final_completions.push_back(trim(completion));
    }
    result.final_answer = majority_vote(result.final_completions);
    {
      RunLogEvent event;
      event.stage = "final_vote";
      event.prompt_id = prompts::PromptId::qa_final;
      event.rendered_prompt = final_rendered;
      event.completions = final_call.completions;
      event.data = {{"final_answer", result.final_answer}};
      emit(options, std::move(event));
    }

    if (mode == QaMode::multiple_choice &&
        !question.options.count(result.final_answer)) {
      throw InvalidChoiceLetter("final answer '" + result.final_answer +
                                "' is not an option letter of question " + question.id);
    }
  } catch (const Error& e) {
    result.transcript.terminated_by = Termination::error;
    RunLogEvent event;
    event.stage = "error";
    event.data = {{"error", e.what()}};
    emit(options, std::move(event));
    throw QaAborted(e.what(), std::move(result));
  }

  RunLogEvent event;
  event.stage = "result";
  event.data = {{"mode", to_string(mode)},
                {"terminated_by", to_string(result.transcript.terminated_by)},
                {"top_vote", result.tally.top().text},
                {"final_answer", result.final_answer}};
  emit(options, std::move(event));
  return result;
}

}  // namespace dera::engine
