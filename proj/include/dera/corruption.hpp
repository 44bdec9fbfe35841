#pragma once

#include <string>

#include "dera/backend.hpp"
#include "dera/datasets.hpp"
#include "dera/error.hpp"
#include "dera/prompts.hpp"
#include "dera/types.hpp"

namespace dera::corruption {

/// The corruption completion could not be parsed back into the six-section
/// summary structure.
class CorruptionParseError : public Error {
 public:
  explicit CorruptionParseError(const std::string& message) : Error(message) {}
};

struct CorruptionJob {
  datasets::StructuredSummary source_summary;
  CorruptionLevel level = CorruptionLevel::low;
};

struct CorruptionResult {
  datasets::StructuredSummary summary;
  std::string rendered_prompt;
  std::string completion;
};

/// Asks the backend to damage a summary with the level's magnitude and
/// parses the reply back into the section structure.
CorruptionResult corrupt(const CorruptionJob& job, const prompts::PromptRegistry& registry,
                         backend::Backend& backend, const std::string& model);

}  // namespace dera::corruption
