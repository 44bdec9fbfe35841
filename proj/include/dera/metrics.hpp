#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dera/backend.hpp"
#include "dera/datasets.hpp"
#include "dera/error.hpp"
#include "dera/prompts.hpp"

namespace dera::metrics {

/// Verifier verdict count does not match the concept count.
class VerifierShapeError : public Error {
 public:
  explicit VerifierShapeError(const std::string& message) : Error(message) {}
};

class SimilarityParseError : public Error {
 public:
  explicit SimilarityParseError(const std::string& message) : Error(message) {}
};

class JudgeParseError : public Error {
 public:
  explicit JudgeParseError(const std::string& message) : Error(message) {}
};

/// Distinct concepts in extraction order; deduplicated case-insensitively.
struct ConceptSet {
  std::vector<std::string> concepts;

  bool empty() const { return concepts.empty(); }
  size_t size() const { return concepts.size(); }
};

struct MetricReport {
  int tp_gt = 0;
  int fn = 0;
  int tp_pred = 0;
  int fp = 0;
  double recall = 0;
  double precision = 0;
  double f1 = 0;
};

/// Precision, recall, and F1 from raw counts. Empty sides follow the
/// same degenerate rules as gpt_f1.
MetricReport report_from_counts(int tp_gt, int fn, int tp_pred, int fp);

enum class Aggregation { micro, macro };

struct SectionReport {
  std::string section;
  MetricReport report;
};

struct DocumentReport {
  std::vector<SectionReport> sections;
  MetricReport document;
};

struct ExactMatch {
  bool match = false;
  std::string explanation;
};

/// Concept-overlap scoring and answer judging, all mediated by a chat
/// backend.
class MetricSuite {
 public:
  MetricSuite(const prompts::PromptRegistry& registry, backend::Backend& backend,
              std::string model)
      : registry_(registry), backend_(backend), model_(std::move(model)) {}

  /// Distinct concepts mentioned in a section; empty text short-circuits
  /// to an empty set without a backend call.
  ConceptSet extract_concepts(const std::string& section_text) const;

  /// One verdict per concept: is it present in the text, verbatim or
  /// rephrased? An empty concept set short-circuits to no verdicts, empty
  /// text to all-absent; neither reaches the backend.
  std::vector<bool> verify_concepts(const ConceptSet& concepts,
                                    const std::string& against_text) const;

  /// Recall verifies ground-truth concepts against the predicted text;
  /// precision verifies predicted concepts against the ground-truth text.
  /// Both concept sets empty scores 1.0 across the board; exactly one
  /// empty zeroes the metric whose denominator vanished.
  MetricReport gpt_f1(const std::string& ground_truth_section,
                      const std::string& predicted_section) const;

  DocumentReport document_gpt_f1(const datasets::StructuredSummary& ground_truth,
                                 const datasets::StructuredSummary& predicted,
                                 Aggregation aggregation = Aggregation::micro) const;

  /// Parsed score before range handling.
  double similarity_raw(const std::string& predicted, const std::string& gold) const;

  /// Scores a batch; out-of-range values clamp to 0 unless every score in
  /// the batch is exactly 100, in which case each maps to 1.0.
  std::vector<double> similarity_scores(
      const std::vector<std::pair<std::string, std::string>>& pairs) const;

  double similarity_score(const std::string& predicted, const std::string& gold) const;

  /// Byte-identical answers match without a backend call.
  ExactMatch exact_match_judge(const std::string& predicted, const std::string& gold) const;

  static std::vector<double> clamp_similarity_batch(const std::vector<double>& raw);

 private:
  std::vector<std::string> call(prompts::PromptId id, const prompts::VarMap& vars) const;

  const prompts::PromptRegistry& registry_;
  backend::Backend& backend_;
  std::string model_;
};

}  // namespace dera::metrics
