#include "dera/types.hpp"

#include "dera/strings.hpp"

namespace dera {

const char* to_string(Role role) {
  switch (role) {
    case Role::system: return "system";
    case Role::agent_decider: return "agent_decider";
    case Role::agent_researcher: return "agent_researcher";
    case Role::backend_user: return "backend_user";
    case Role::backend_assistant: return "backend_assistant";
  }
  return "unknown";
}

const char* to_string(Termination termination) {
  switch (termination) {
    case Termination::researcher_done: return "researcher_done";
    case Termination::turn_budget: return "turn_budget";
    case Termination::error: return "error";
  }
  return "unknown";
}

void DialogTranscript::append(Role role, std::string content) {
  if (role != Role::agent_decider && role != Role::agent_researcher) {
    throw Error("transcript messages must come from an agent");
  }
  if (trim(content).empty()) {
    throw Error("transcript message must be non-empty");
  }
  if (!messages.empty() && messages.back().role == role) {
    throw Error("consecutive transcript messages from the same agent");
  }
  messages.push_back({role, std::move(content), static_cast<int>(messages.size())});
}

int DialogTranscript::count_role(Role role) const {
  int n = 0;
  for (const auto& m : messages) {
    if (m.role == role) ++n;
  }
  return n;
}

int VoteTally::total() const {
  int sum = 0;
  for (const auto& e : entries) sum += e.count;
  return sum;
}

double VoteTally::fraction(size_t index) const {
  return static_cast<double>(entries.at(index).count) / static_cast<double>(total());
}

const VoteCount& VoteTally::top() const {
  if (entries.empty()) throw EmptyBallot();
  const VoteCount* best = &entries.front();
  for (const auto& e : entries) {
    if (e.count > best->count) best = &e;
  }
  return *best;
}

void GenerationParams::validate() const {
  if (temperature < 0) throw Error("temperature must be >= 0");
  if (max_tokens <= 0) throw Error("max_tokens must be > 0");
  if (top_p <= 0 || top_p > 1) throw Error("top_p must be in (0, 1]");
  if (num_completions <= 0) throw Error("num_completions must be > 0");
  if (turn_budget && *turn_budget <= 0) throw Error("turn_budget must be > 0");
}

int corruption_magnitude(CorruptionLevel level) {
  switch (level) {
    case CorruptionLevel::low: return 3;
    case CorruptionLevel::medium: return 5;
    case CorruptionLevel::high: return 7;
  }
  throw Error("unknown corruption level");
}

const char* to_string(CorruptionLevel level) {
  switch (level) {
    case CorruptionLevel::low: return "low";
    case CorruptionLevel::medium: return "medium";
    case CorruptionLevel::high: return "high";
  }
  return "unknown";
}

CorruptionLevel corruption_level_from_string(const std::string& name) {
  if (name == "low") return CorruptionLevel::low;
  if (name == "medium") return CorruptionLevel::medium;
  if (name == "high") return CorruptionLevel::high;
  throw Error("unknown corruption level: " + name);
}

const char* to_string(DecisionKind kind) {
  return kind == DecisionKind::accept ? "accept" : "reject";
}

}  // namespace dera
