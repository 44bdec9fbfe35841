#pragma once

#include <string>
#include <vector>

#include "dera/types.hpp"

namespace dera {

/// Counts each lexical form after whitespace trimming. No other
/// normalization: "UTI" and "uti" stay separate forms. Entries keep
/// first-occurrence order.
VoteTally vote_distribution(const std::vector<std::string>& completions);

/// Most frequent completion; ties go to the form that occurred first.
/// Expects elements already whitespace-trimmed.
std::string majority_vote(const std::vector<std::string>& completions);

/// Returns the scratchpad with the decision applied: ACCEPT text is
/// appended, REJECT leaves it unchanged. A duplicate of the latest entry
/// (byte-identical) collapses to one.
Scratchpad scratchpad_append(Scratchpad pad, const DeciderDecision& decision);

}  // namespace dera
