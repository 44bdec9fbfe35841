#include "dera/voting.hpp"

#include "dera/strings.hpp"

namespace dera {

VoteTally vote_distribution(const std::vector<std::string>& completions) {
  if (completions.empty()) throw EmptyBallot();
  VoteTally tally;
  for (const auto& completion : completions) {
    const std::string form = trim(completion);
    bool found = false;
    for (auto& entry : tally.entries) {
      if (entry.text == form) {
        ++entry.count;
        found = true;
        break;
      }
    }
    if (!found) tally.entries.push_back({form, 1});
  }
  return tally;
}

std::string majority_vote(const std::vector<std::string>& completions) {
  if (completions.empty()) throw EmptyBallot();
  VoteTally tally;
  for (const auto& completion : completions) {
    bool found = false;
    for (auto& entry : tally.entries) {
      if (entry.text == completion) {
        ++entry.count;
        found = true;
        break;
      }
    }
    if (!found) tally.entries.push_back({completion, 1});
  }
  return tally.top().text;
}

Scratchpad scratchpad_append(Scratchpad pad, const DeciderDecision& decision) {
  if (decision.kind == DecisionKind::reject) return pad;
  if (!pad.entries.empty() && pad.entries.back() == decision.text) return pad;
  pad.entries.push_back(decision.text);
  return pad;
}

}  // namespace dera
