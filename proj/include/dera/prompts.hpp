#pragma once

#include <array>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "dera/error.hpp"
#include "dera/types.hpp"

namespace dera::prompts {

enum class PromptId {
  summ_initial,
  summ_decider,
  summ_researcher,
  summ_corruption,
  summ_final,
  metric_extractor,
  metric_verifier,
  cp_initial,
  cp_decider,
  cp_researcher,
  cp_final,
  rewrite_full,
  rewrite_last,
  qa_single_shot,
  qa_student_exp,
  qa_teacher,
  qa_student,
  qa_final,
  qa_sim,
  qa_exact,
};

constexpr size_t kPromptCount = 20;

const std::array<PromptId, kPromptCount>& all_prompt_ids();
const char* to_string(PromptId id);
PromptId prompt_id_from_string(const std::string& name);

class UnknownPrompt : public Error {
 public:
  explicit UnknownPrompt(const std::string& name)
      : Error("unknown prompt: " + name) {}
};

class MissingVariable : public Error {
 public:
  MissingVariable(const std::string& prompt, const std::string& variable)
      : Error("prompt " + prompt + ": missing variable '" + variable + "'"),
        variable(variable) {}
  std::string variable;
};

class UnexpectedVariable : public Error {
 public:
  UnexpectedVariable(const std::string& prompt, const std::string& variable)
      : Error("prompt " + prompt + ": unexpected variable '" + variable + "'"),
        variable(variable) {}
  std::string variable;
};

/// Manifest or template file problem found while loading a registry.
class RegistryError : public Error {
 public:
  explicit RegistryError(const std::string& message) : Error(message) {}
};

using VarMap = std::map<std::string, std::string>;

/// A parsed template. Placeholders are written {{name}}; "\{" and "\}"
/// render literal braces. Values substitute verbatim and are never
/// re-scanned for placeholders.
class PromptTemplate {
 public:
  static PromptTemplate parse(const std::string& text);

  const std::set<std::string>& placeholders() const { return placeholders_; }
  std::string render(const VarMap& vars) const;

 private:
  struct Segment {
    bool is_var;
    std::string text;
  };
  std::vector<Segment> segments_;
  std::set<std::string> placeholders_;
};

struct PromptSpec {
  PromptId id;
  std::string template_text;
  GenerationParams params;
  std::vector<std::string> required_vars;
};

/// Immutable set of all prompt templates and their sampling parameters,
/// loaded from a directory holding manifest.json plus one text file per
/// prompt. Every PromptId must be present exactly once.
class PromptRegistry {
 public:
  static PromptRegistry load(const std::string& dir);

  const PromptSpec& spec(PromptId id) const;
  GenerationParams params_for(PromptId id) const;
  std::string render(PromptId id, const VarMap& vars) const;
  std::string render(const std::string& name, const VarMap& vars) const;

 private:
  PromptRegistry() = default;
  struct Entry {
    PromptSpec spec;
    PromptTemplate compiled;
  };
  std::array<Entry, kPromptCount> entries_;
};

}  // namespace dera::prompts
