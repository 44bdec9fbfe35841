#include "dera/metrics.hpp"

#include <array>
#include <cctype>
#include <cstdlib>
#include <set>

#include "dera/strings.hpp"

namespace dera::metrics {

namespace {

bool parse_number(const std::string& text, double* out) {
  const std::string trimmed = trim(text);
  if (trimmed.empty()) return false;
  char* end = nullptr;
  const double value = std::strtod(trimmed.c_str(), &end);
  if (end != trimmed.c_str() + trimmed.size()) return false;
  *out = value;
  return true;
}

struct SectionAccess {
  const char* name;
  const std::string& (*get)(const datasets::StructuredSummary&);
};

const std::array<SectionAccess, 6> kSections = {{
    {"demographics_social",
     [](const datasets::StructuredSummary& s) -> const std::string& { return s.demographics_social; }},
    {"medical_intent",
     [](const datasets::StructuredSummary& s) -> const std::string& { return s.medical_intent; }},
    {"pertinent_positives",
     [](const datasets::StructuredSummary& s) -> const std::string& { return s.pertinent_positives; }},
    {"pertinent_negatives",
     [](const datasets::StructuredSummary& s) -> const std::string& { return s.pertinent_negatives; }},
    {"pertinent_unknowns",
     [](const datasets::StructuredSummary& s) -> const std::string& { return s.pertinent_unknowns; }},
    {"medical_history",
     [](const datasets::StructuredSummary& s) -> const std::string& { return s.medical_history; }},
}};

}  // namespace

MetricReport report_from_counts(int tp_gt, int fn, int tp_pred, int fp) {
  MetricReport report;
  report.tp_gt = tp_gt;
  report.fn = fn;
  report.tp_pred = tp_pred;
  report.fp = fp;
  const int gt_total = tp_gt + fn;
  const int pred_total = tp_pred + fp;
  if (gt_total == 0 && pred_total == 0) {
    report.recall = 1;
    report.precision = 1;
    report.f1 = 1;
    return report;
  }
  report.recall = gt_total == 0 ? 0 : static_cast<double>(tp_gt) / gt_total;
  report.precision = pred_total == 0 ? 0 : static_cast<double>(tp_pred) / pred_total;
  if (report.recall > 0 && report.precision > 0) {
    report.f1 = 2 * report.precision * report.recall / (report.precision + report.recall);
  }
  return report;
}

std::vector<std::string> MetricSuite::call(prompts::PromptId id,
                                           const prompts::VarMap& vars) const {
  backend::ChatRequest request;
  request.model = model_;
  request.messages = {{backend::WireRole::user, registry_.render(id, vars)}};
  request.params = registry_.params_for(id);
  return backend_.complete(request);
}

ConceptSet MetricSuite::extract_concepts(const std::string& section_text) const {
  ConceptSet result;
  if (trim(section_text).empty()) return result;

  const auto completions = call(prompts::PromptId::metric_extractor,
                                {{"section", section_text}});
  std::set<std::string> seen;
  for (const auto& line : split_lines(completions.at(0))) {
    const std::string entry = trim(line);
    if (entry.empty()) continue;
    if (seen.insert(to_lower(entry)).second) {
      result.concepts.push_back(entry);
    }
  }
  return result;
}

std::vector<bool> MetricSuite::verify_concepts(const ConceptSet& concepts,
                                               const std::string& against_text) const {
  if (concepts.empty()) return {};
  if (trim(against_text).empty()) return std::vector<bool>(concepts.size(), false);

  const auto completions =
      call(prompts::PromptId::metric_verifier,
           {{"concepts", join(concepts.concepts, "\n")}, {"text", against_text}});
  std::vector<bool> verdicts;
  for (const auto& line : split_lines(completions.at(0))) {
    const std::string verdict = to_lower(trim(line));
    if (verdict == "present") {
      verdicts.push_back(true);
    } else if (verdict == "absent") {
      verdicts.push_back(false);
    } else if (!verdict.empty()) {
      throw VerifierShapeError("unrecognized verdict: '" + trim(line) + "'");
    }
  }
  if (verdicts.size() != concepts.size()) {
    throw VerifierShapeError("verifier returned " + std::to_string(verdicts.size()) +
                             " verdicts for " + std::to_string(concepts.size()) +
                             " concepts");
  }
  return verdicts;
}

MetricReport MetricSuite::gpt_f1(const std::string& ground_truth_section,
                                 const std::string& predicted_section) const {
  const ConceptSet gt = extract_concepts(ground_truth_section);
  const ConceptSet pred = extract_concepts(predicted_section);

  int tp_gt = 0;
  int fn = 0;
  if (!gt.empty()) {
    for (const bool present : verify_concepts(gt, predicted_section)) {
      present ? ++tp_gt : ++fn;
    }
  }
  int tp_pred = 0;
  int fp = 0;
  if (!pred.empty()) {
    for (const bool present : verify_concepts(pred, ground_truth_section)) {
      present ? ++tp_pred : ++fp;
    }
  }
  return report_from_counts(tp_gt, fn, tp_pred, fp);
}

DocumentReport MetricSuite::document_gpt_f1(const datasets::StructuredSummary& ground_truth,
                                            const datasets::StructuredSummary& predicted,
                                            Aggregation aggregation) const {
  DocumentReport report;
  for (const auto& section : kSections) {
    report.sections.push_back(
        {section.name, gpt_f1(section.get(ground_truth), section.get(predicted))});
  }
  if (aggregation == Aggregation::micro) {
    int tp_gt = 0, fn = 0, tp_pred = 0, fp = 0;
    for (const auto& section : report.sections) {
      tp_gt += section.report.tp_gt;
      fn += section.report.fn;
      tp_pred += section.report.tp_pred;
      fp += section.report.fp;
    }
    report.document = report_from_counts(tp_gt, fn, tp_pred, fp);
  } else {
    double recall = 0, precision = 0, f1 = 0;
    for (const auto& section : report.sections) {
      recall += section.report.recall;
      precision += section.report.precision;
      f1 += section.report.f1;
    }
    const double n = static_cast<double>(report.sections.size());
    report.document.recall = recall / n;
    report.document.precision = precision / n;
    report.document.f1 = f1 / n;
  }
  return report;
}

double MetricSuite::similarity_raw(const std::string& predicted,
                                   const std::string& gold) const {
  const auto completions = call(prompts::PromptId::qa_sim,
                                {{"predicted", predicted}, {"gold", gold}});
  double value = 0;
  if (!parse_number(completions.at(0), &value)) {
    throw SimilarityParseError("similarity judge returned a non-numeric completion: '" +
                               trim(completions.at(0)) + "'");
  }
  return value;
}

std::vector<double> MetricSuite::clamp_similarity_batch(const std::vector<double>& raw) {
  bool all_hundred = !raw.empty();
  for (const double value : raw) {
    if (value != 100.0) {
      all_hundred = false;
      break;
    }
  }
  std::vector<double> scores;
  scores.reserve(raw.size());
  for (const double value : raw) {
    if (all_hundred) {
      scores.push_back(1.0);
    } else if (value >= 0.0 && value <= 1.0) {
      scores.push_back(value);
    } else {
      scores.push_back(0.0);
    }
  }
  return scores;
}

std::vector<double> MetricSuite::similarity_scores(
    const std::vector<std::pair<std::string, std::string>>& pairs) const {
  std::vector<double> raw;
  raw.reserve(pairs.size());
  for (const auto& [predicted, gold] : pairs) {
    raw.push_back(similarity_raw(predicted, gold));
  }
  return clamp_similarity_batch(raw);
}

double MetricSuite::similarity_score(const std::string& predicted,
                                     const std::string& gold) const {
  return similarity_scores({{predicted, gold}}).at(0);
}

ExactMatch MetricSuite::exact_match_judge(const std::string& predicted,
                                          const std::string& gold) const {
  if (predicted == gold) return {true, "identical text"};

  const auto completions = call(prompts::PromptId::qa_exact,
                                {{"predicted", predicted}, {"gold", gold}});
  const std::string reply = trim(completions.at(0));
  size_t verdict_end = 0;
  while (verdict_end < reply.size() &&
         std::isalpha(static_cast<unsigned char>(reply[verdict_end]))) {
    ++verdict_end;
  }
  const std::string verdict = to_lower(reply.substr(0, verdict_end));
  ExactMatch result;
  if (verdict == "yes") {
    result.match = true;
  } else if (verdict == "no") {
    result.match = false;
  } else {
    throw JudgeParseError("exact-match judge reply lacks a Yes/No verdict: '" + reply + "'");
  }
  std::string rest = reply.substr(verdict_end);
  size_t start = 0;
  while (start < rest.size()) {
    const unsigned char c = rest[start];
    if (std::isspace(c) || c == '.' || c == ',' || c == ':' || c == ';' || c == '-') {
      ++start;
      continue;
    }
    if (rest.compare(start, 3, "\xE2\x80\x94") == 0 ||
        rest.compare(start, 3, "\xE2\x80\x93") == 0) {
      start += 3;
      continue;
    }
    break;
  }
  result.explanation = trim(rest.substr(start));
  return result;
}

}  // namespace dera::metrics
