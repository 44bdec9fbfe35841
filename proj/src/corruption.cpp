#include "dera/corruption.hpp"

#include "dera/strings.hpp"

namespace dera::corruption {

CorruptionResult corrupt(const CorruptionJob& job, const prompts::PromptRegistry& registry,
                         backend::Backend& backend, const std::string& model) {
  CorruptionResult result;
  result.rendered_prompt = registry.render(
      prompts::PromptId::summ_corruption,
      {{"summary", datasets::summary_text(job.source_summary)},
       {"level", std::to_string(corruption_magnitude(job.level))}});

  backend::ChatRequest request;
  request.model = model;
  request.messages = {{backend::WireRole::user, result.rendered_prompt}};
  request.params = registry.params_for(prompts::PromptId::summ_corruption);
  result.completion = backend.complete(request).at(0);

  try {
    result.summary = datasets::parse_summary_text(result.completion);
  } catch (const Error& e) {
    throw CorruptionParseError(std::string("corrupted summary is unparseable: ") + e.what());
  }
  return result;
}

}  // namespace dera::corruption
