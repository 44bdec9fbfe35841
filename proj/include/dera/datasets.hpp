#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dera/backend.hpp"
#include "dera/error.hpp"
#include "dera/prompts.hpp"

namespace dera::datasets {

/// A corpus line that cannot be ingested; line numbers are 1-based.
class IngestError : public Error {
 public:
  IngestError(int line, const std::string& reason)
      : Error("line " + std::to_string(line) + ": " + reason), line(line) {}
  int line;
};

class EmptyCorpus : public Error {
 public:
  EmptyCorpus() : Error("corpus holds no encounters") {}
};

/// A last-sentence rewrite changed more than the final sentence.
class RewriteDriftError : public Error {
 public:
  explicit RewriteDriftError(const std::string& message) : Error(message) {}
};

class SplitError : public Error {
 public:
  explicit SplitError(const std::string& message) : Error(message) {}
};

enum class Speaker { patient, provider };

const char* to_string(Speaker speaker);

struct DialogTurn {
  Speaker speaker;
  std::string text;
  bool operator==(const DialogTurn&) const = default;
};

struct Encounter {
  std::string id;
  int age = 0;
  std::string sex;
  std::string reason_for_visit;
  std::vector<DialogTurn> dialog;
  bool operator==(const Encounter&) const = default;
};

struct StructuredSummary {
  std::string demographics_social;
  std::string medical_intent;
  std::string pertinent_positives;
  std::string pertinent_negatives;
  std::string pertinent_unknowns;
  std::string medical_history;
  bool operator==(const StructuredSummary&) const = default;
};

struct CarePlan {
  std::string medications;
  std::string referrals;
  std::string tests;
  std::string lifestyle;
  std::string supportive_care;
  bool operator==(const CarePlan&) const = default;
};

struct ExamQuestion {
  std::string id;
  std::string stem;
  std::map<std::string, std::string> options;  // empty = no options
  std::optional<std::string> gold_letter;
  std::string gold_text;
  std::optional<std::string> area;
  std::optional<std::string> open_ended_stem;
  bool operator==(const ExamQuestion&) const = default;
};

std::vector<Encounter> load_encounters(const std::string& path);
void save_encounters(const std::vector<Encounter>& encounters, const std::string& path);
Encounter encounter_from_json(const nlohmann::json& value);
nlohmann::json encounter_to_json(const Encounter& encounter);

/// Dialog rendered one turn per line: "speaker: text".
std::string dialog_text(const Encounter& encounter);

struct CorpusStats {
  size_t encounters = 0;
  double turns_mean = 0;
  int turns_min = 0;
  int turns_max = 0;
  double tokens_mean = 0;
  int tokens_min = 0;
  int tokens_max = 0;
};

/// Dialog-turn and whitespace-token counts per encounter.
CorpusStats corpus_stats(const std::vector<Encounter>& encounters);

std::vector<ExamQuestion> load_questions(const std::string& path);
void save_questions(const std::vector<ExamQuestion>& questions, const std::string& path);
ExamQuestion question_from_json(const nlohmann::json& value);
nlohmann::json question_to_json(const ExamQuestion& question);

StructuredSummary load_summary(const std::string& path);
void save_summary(const StructuredSummary& summary, const std::string& path);
StructuredSummary summary_from_json(const nlohmann::json& value);
nlohmann::json summary_to_json(const StructuredSummary& summary);

/// The six summary headings, in render order.
const std::vector<std::string>& summary_headings();
std::string summary_text(const StructuredSummary& summary);
StructuredSummary parse_summary_text(const std::string& text);

const std::vector<std::string>& careplan_headings();
std::string careplan_text(const CarePlan& plan);
CarePlan parse_careplan_text(const std::string& text);
CarePlan careplan_from_json(const nlohmann::json& value);
nlohmann::json careplan_to_json(const CarePlan& plan);

/// Splits on '.', '?' or '!' followed by whitespace, never inside
/// parentheses or brackets. Sentences come back trimmed, punctuation kept.
std::vector<std::string> split_sentences(const std::string& text);

/// Cue phrases that mark a stem as option-bound rather than open-ended.
const std::vector<std::string>& default_option_cues();

enum class RewriteMode { last_sentence, full };

const char* to_string(RewriteMode mode);
RewriteMode rewrite_mode_from_string(const std::string& name);

/// Rewrites an option-bound stem into an open-ended one and stores it in
/// open_ended_stem. A stem without any option cue passes through without a
/// backend call. In last_sentence mode every sentence before the final one
/// must survive byte-identical, else RewriteDriftError.
ExamQuestion rewrite_open_ended(const ExamQuestion& question, RewriteMode mode,
                                const prompts::PromptRegistry& registry,
                                backend::Backend& backend, const std::string& model,
                                const std::vector<std::string>& cues = default_option_cues());

struct SplitResult {
  std::vector<ExamQuestion> dev;
  std::vector<ExamQuestion> test;
};

/// Partition by clinical area: dev keeps the listed areas. Every question
/// must carry an area.
SplitResult split_by_area(const std::vector<ExamQuestion>& questions,
                          const std::set<std::string>& dev_areas);

const std::set<std::string>& nejm_dev_areas();

/// Uniform sample without replacement, preserving corpus order.
std::vector<ExamQuestion> sample_questions(const std::vector<ExamQuestion>& questions,
                                           size_t count, uint64_t seed);

}  // namespace dera::datasets
