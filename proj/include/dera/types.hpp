#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dera/error.hpp"

namespace dera {

enum class Role {
  system,
  agent_decider,
  agent_researcher,
  backend_user,
  backend_assistant,
};

const char* to_string(Role role);

struct ChatMessage {
  Role role;
  std::string content;
  int turn_index = 0;
};

enum class Termination {
  researcher_done,
  turn_budget,
  error,
};

const char* to_string(Termination termination);

/// Ordered record of agent messages in one run. Roles alternate after the
/// opening message; append() enforces that and assigns turn indices.
struct DialogTranscript {
  std::vector<ChatMessage> messages;
  Termination terminated_by = Termination::error;

  void append(Role role, std::string content);
  int count_role(Role role) const;
};

/// Append-only list of accepted suggestions.
struct Scratchpad {
  std::vector<std::string> entries;

  bool empty() const { return entries.empty(); }
  size_t size() const { return entries.size(); }
};

struct VoteCount {
  std::string text;
  int count = 0;
};

/// Vote counts per lexical form, in order of first occurrence.
struct VoteTally {
  std::vector<VoteCount> entries;

  int total() const;
  double fraction(size_t index) const;
  const VoteCount& top() const;
  bool empty() const { return entries.empty(); }
};

struct GenerationParams {
  double temperature = 1.0;
  int max_tokens = 256;
  double top_p = 1.0;
  double frequency_penalty = 0.0;
  int num_completions = 1;
  std::optional<int> turn_budget;

  void validate() const;
  bool operator==(const GenerationParams&) const = default;
};

enum class CorruptionLevel { low, medium, high };

/// Corruption magnitude on a 0-10 scale: low 3, medium 5, high 7.
int corruption_magnitude(CorruptionLevel level);
const char* to_string(CorruptionLevel level);
CorruptionLevel corruption_level_from_string(const std::string& name);

enum class DecisionKind { accept, reject };

const char* to_string(DecisionKind kind);

/// A single ACCEPT or REJECT line from a Decider reply.
struct DeciderDecision {
  DecisionKind kind;
  std::string text;
};

}  // namespace dera
