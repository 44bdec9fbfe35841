#include "dera/datasets.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>

#include "dera/strings.hpp"

namespace dera::datasets {

namespace {

void require_version(const nlohmann::json& value, const char* what) {
  if (!value.contains("format_version") || value["format_version"] != 1) {
    throw Error(std::string(what) + " must declare format_version 1");
  }
}

std::string require_string(const nlohmann::json& value, const char* field) {
  if (!value.contains(field) || !value[field].is_string()) {
    throw Error(std::string("missing field: ") + field);
  }
  return value[field].get<std::string>();
}

template <typename Fn>
auto load_jsonl(const std::string& path, Fn parse_line) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  std::vector<decltype(parse_line(nlohmann::json{}))> records;
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json value;
    try {
      value = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IngestError(line_number, std::string("invalid JSON: ") + e.what());
    }
    try {
      records.push_back(parse_line(value));
    } catch (const IngestError&) {
      throw;
    } catch (const std::exception& e) {
      throw IngestError(line_number, e.what());
    }
  }
  return records;
}

void write_jsonl(const std::string& path, const std::vector<nlohmann::json>& lines) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  for (const auto& line : lines) out << line.dump() << '\n';
}

std::string section_block(const std::string& heading, const std::string& content) {
  std::string block = heading + ":\n";
  const std::string trimmed = trim(content);
  if (!trimmed.empty()) block += trimmed + "\n";
  return block;
}

std::map<std::string, std::string> parse_headed_text(
    const std::string& text, const std::vector<std::string>& headings) {
  std::map<std::string, std::string> sections;
  std::string current;
  std::map<std::string, std::vector<std::string>> bodies;
  for (const auto& line : split_lines(text)) {
    const std::string trimmed = trim(line);
    bool is_heading = false;
    for (const auto& heading : headings) {
      if (trimmed == heading + ":") {
        if (bodies.count(heading)) {
          throw Error("duplicate heading: " + heading);
        }
        bodies[heading];
        current = heading;
        is_heading = true;
        break;
      }
    }
    if (is_heading) continue;
    if (!current.empty()) bodies[current].push_back(line);
  }
  for (const auto& heading : headings) {
    if (!bodies.count(heading)) throw Error("missing heading: " + heading);
    sections[heading] = trim(join(bodies[heading], "\n"));
  }
  return sections;
}

}  // namespace

const char* to_string(Speaker speaker) {
  return speaker == Speaker::patient ? "patient" : "provider";
}

Encounter encounter_from_json(const nlohmann::json& value) {
  require_version(value, "encounter");
  Encounter encounter;
  encounter.id = require_string(value, "id");
  if (!value.contains("age") || !value["age"].is_number_integer()) {
    throw Error("missing field: age");
  }
  encounter.age = value["age"].get<int>();
  if (encounter.age < 0) throw Error("age must be non-negative");
  encounter.sex = require_string(value, "sex");
  if (value.contains("reason_for_visit")) {
    encounter.reason_for_visit = value["reason_for_visit"].get<std::string>();
  }
  if (!value.contains("dialog") || !value["dialog"].is_array() || value["dialog"].empty()) {
    throw Error("dialog must be a non-empty array");
  }
  for (const auto& turn : value["dialog"]) {
    const std::string speaker = require_string(turn, "speaker");
    DialogTurn parsed;
    if (speaker == "patient") {
      parsed.speaker = Speaker::patient;
    } else if (speaker == "provider") {
      parsed.speaker = Speaker::provider;
    } else {
      throw Error("unknown speaker: " + speaker);
    }
    parsed.text = require_string(turn, "text");
    encounter.dialog.push_back(std::move(parsed));
  }
  return encounter;
}

nlohmann::json encounter_to_json(const Encounter& encounter) {
  nlohmann::json dialog = nlohmann::json::array();
  for (const auto& turn : encounter.dialog) {
    dialog.push_back({{"speaker", to_string(turn.speaker)}, {"text", turn.text}});
  }
  return nlohmann::json{{"format_version", 1},
                        {"id", encounter.id},
                        {"age", encounter.age},
                        {"sex", encounter.sex},
                        {"reason_for_visit", encounter.reason_for_visit},
                        {"dialog", std::move(dialog)}};
}

std::vector<Encounter> load_encounters(const std::string& path) {
  return load_jsonl(path, encounter_from_json);
}

void save_encounters(const std::vector<Encounter>& encounters, const std::string& path) {
  std::vector<nlohmann::json> lines;
  for (const auto& encounter : encounters) lines.push_back(encounter_to_json(encounter));
  write_jsonl(path, lines);
}

std::string dialog_text(const Encounter& encounter) {
  std::vector<std::string> lines;
  for (const auto& turn : encounter.dialog) {
    lines.push_back(std::string(to_string(turn.speaker)) + ": " + turn.text);
  }
  return join(lines, "\n");
}

CorpusStats corpus_stats(const std::vector<Encounter>& encounters) {
  if (encounters.empty()) throw EmptyCorpus();
  CorpusStats stats;
  stats.encounters = encounters.size();
  long turn_sum = 0;
  long token_sum = 0;
  for (size_t i = 0; i < encounters.size(); ++i) {
    const int turns = static_cast<int>(encounters[i].dialog.size());
    int tokens = 0;
    for (const auto& turn : encounters[i].dialog) {
      tokens += static_cast<int>(whitespace_tokens(turn.text).size());
    }
    turn_sum += turns;
    token_sum += tokens;
    if (i == 0 || turns < stats.turns_min) stats.turns_min = turns;
    if (i == 0 || turns > stats.turns_max) stats.turns_max = turns;
    if (i == 0 || tokens < stats.tokens_min) stats.tokens_min = tokens;
    if (i == 0 || tokens > stats.tokens_max) stats.tokens_max = tokens;
  }
  stats.turns_mean = static_cast<double>(turn_sum) / static_cast<double>(encounters.size());
  stats.tokens_mean = static_cast<double>(token_sum) / static_cast<double>(encounters.size());
  return stats;
}

ExamQuestion question_from_json(const nlohmann::json& value) {
  require_version(value, "question");
  ExamQuestion question;
  question.id = require_string(value, "id");
  question.stem = require_string(value, "stem");
  question.gold_text = require_string(value, "gold_text");
  if (value.contains("options")) {
    if (!value["options"].is_object()) throw Error("options must be an object");
    for (const auto& [letter, text] : value["options"].items()) {
      if (letter.size() != 1 || letter[0] < 'A' || letter[0] > 'E') {
        throw Error("option letter out of range A-E: " + letter);
      }
      question.options[letter] = text.get<std::string>();
    }
  }
  if (value.contains("gold_letter")) {
    question.gold_letter = value["gold_letter"].get<std::string>();
  }
  if (!question.options.empty()) {
    if (!question.gold_letter) throw Error("options present but gold_letter missing");
    const auto hit = question.options.find(*question.gold_letter);
    if (hit == question.options.end()) {
      throw Error("gold_letter " + *question.gold_letter + " is not an option");
    }
    if (hit->second != question.gold_text) {
      throw Error("gold_text does not match the gold_letter option");
    }
  }
  if (value.contains("area")) question.area = value["area"].get<std::string>();
  if (value.contains("open_ended_stem")) {
    question.open_ended_stem = value["open_ended_stem"].get<std::string>();
  }
  return question;
}

nlohmann::json question_to_json(const ExamQuestion& question) {
  nlohmann::json value{{"format_version", 1},
                       {"id", question.id},
                       {"stem", question.stem},
                       {"gold_text", question.gold_text}};
  if (!question.options.empty()) value["options"] = question.options;
  if (question.gold_letter) value["gold_letter"] = *question.gold_letter;
  if (question.area) value["area"] = *question.area;
  if (question.open_ended_stem) value["open_ended_stem"] = *question.open_ended_stem;
  return value;
}

std::vector<ExamQuestion> load_questions(const std::string& path) {
  return load_jsonl(path, question_from_json);
}

void save_questions(const std::vector<ExamQuestion>& questions, const std::string& path) {
  std::vector<nlohmann::json> lines;
  for (const auto& question : questions) lines.push_back(question_to_json(question));
  write_jsonl(path, lines);
}

const std::vector<std::string>& summary_headings() {
  static const std::vector<std::string> headings = {
      "Demographics and Social Determinants of Health",
      "Medical Intent",
      "Pertinent Positives",
      "Pertinent Negatives",
      "Pertinent Unknowns",
      "Medical History",
  };
  return headings;
}

StructuredSummary summary_from_json(const nlohmann::json& value) {
  require_version(value, "summary");
  StructuredSummary summary;
  summary.demographics_social = require_string(value, "demographics_social");
  summary.medical_intent = require_string(value, "medical_intent");
  summary.pertinent_positives = require_string(value, "pertinent_positives");
  summary.pertinent_negatives = require_string(value, "pertinent_negatives");
  summary.pertinent_unknowns = require_string(value, "pertinent_unknowns");
  summary.medical_history = require_string(value, "medical_history");
  return summary;
}

nlohmann::json summary_to_json(const StructuredSummary& summary) {
  return nlohmann::json{{"format_version", 1},
                        {"demographics_social", summary.demographics_social},
                        {"medical_intent", summary.medical_intent},
                        {"pertinent_positives", summary.pertinent_positives},
                        {"pertinent_negatives", summary.pertinent_negatives},
                        {"pertinent_unknowns", summary.pertinent_unknowns},
                        {"medical_history", summary.medical_history}};
}

StructuredSummary load_summary(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  nlohmann::json value;
  try {
    in >> value;
  } catch (const nlohmann::json::exception& e) {
    throw Error(path + ": " + e.what());
  }
  return summary_from_json(value);
}

void save_summary(const StructuredSummary& summary, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write " + path);
  out << summary_to_json(summary).dump(2) << '\n';
}

std::string summary_text(const StructuredSummary& summary) {
  const auto& h = summary_headings();
  std::vector<std::string> blocks = {
      section_block(h[0], summary.demographics_social),
      section_block(h[1], summary.medical_intent),
      section_block(h[2], summary.pertinent_positives),
      section_block(h[3], summary.pertinent_negatives),
      section_block(h[4], summary.pertinent_unknowns),
      section_block(h[5], summary.medical_history),
  };
  return trim(join(blocks, "\n"));
}

StructuredSummary parse_summary_text(const std::string& text) {
  const auto sections = parse_headed_text(text, summary_headings());
  const auto& h = summary_headings();
  StructuredSummary summary;
  summary.demographics_social = sections.at(h[0]);
  summary.medical_intent = sections.at(h[1]);
  summary.pertinent_positives = sections.at(h[2]);
  summary.pertinent_negatives = sections.at(h[3]);
  summary.pertinent_unknowns = sections.at(h[4]);
  summary.medical_history = sections.at(h[5]);
  return summary;
}

const std::vector<std::string>& careplan_headings() {
  static const std::vector<std::string> headings = {
      "Medications", "Referrals", "Tests", "Lifestyle", "Supportive Care",
  };
  return headings;
}

std::string careplan_text(const CarePlan& plan) {
  const auto& h = careplan_headings();
  std::vector<std::string> blocks = {
      section_block(h[0], plan.medications),  section_block(h[1], plan.referrals),
      section_block(h[2], plan.tests),        section_block(h[3], plan.lifestyle),
      section_block(h[4], plan.supportive_care),
  };
  return trim(join(blocks, "\n"));
}

CarePlan parse_careplan_text(const std::string& text) {
  const auto sections = parse_headed_text(text, careplan_headings());
  const auto& h = careplan_headings();
  CarePlan plan;
  plan.medications = sections.at(h[0]);
  plan.referrals = sections.at(h[1]);
  plan.tests = sections.at(h[2]);
  plan.lifestyle = sections.at(h[3]);
  plan.supportive_care = sections.at(h[4]);
  return plan;
}

CarePlan careplan_from_json(const nlohmann::json& value) {
  require_version(value, "care plan");
  CarePlan plan;
  plan.medications = require_string(value, "medications");
  plan.referrals = require_string(value, "referrals");
  plan.tests = require_string(value, "tests");
  plan.lifestyle = require_string(value, "lifestyle");
  plan.supportive_care = require_string(value, "supportive_care");
  return plan;
}

nlohmann::json careplan_to_json(const CarePlan& plan) {
  return nlohmann::json{{"format_version", 1},
                        {"medications", plan.medications},
                        {"referrals", plan.referrals},
                        {"tests", plan.tests},
                        {"lifestyle", plan.lifestyle},
                        {"supportive_care", plan.supportive_care}};
}

std::vector<std::string> split_sentences(const std::string& text) {
  std::vector<std::string> sentences;
  std::string current;
  int depth = 0;
  size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    current += c;
    if (c == '(' || c == '[') ++depth;
    if ((c == ')' || c == ']') && depth > 0) --depth;
    if ((c == '.' || c == '?' || c == '!') && depth == 0) {
      size_t j = i + 1;
      while (j < text.size() &&
             (text[j] == '.' || text[j] == '?' || text[j] == '!')) {
        current += text[j];
        ++j;
      }
      if (j >= text.size() || std::isspace(static_cast<unsigned char>(text[j]))) {
        const std::string sentence = trim(current);
        if (!sentence.empty()) sentences.push_back(sentence);
        current.clear();
      }
      i = j;
      continue;
    }
    ++i;
  }
  const std::string tail = trim(current);
  if (!tail.empty()) sentences.push_back(tail);
  return sentences;
}

const std::vector<std::string>& default_option_cues() {
  static const std::vector<std::string> cues = {
      "Which of the following",
      "Which one of the following",
  };
  return cues;
}

const char* to_string(RewriteMode mode) {
  return mode == RewriteMode::last_sentence ? "last_sentence" : "full";
}

RewriteMode rewrite_mode_from_string(const std::string& name) {
  if (name == "last_sentence") return RewriteMode::last_sentence;
  if (name == "full") return RewriteMode::full;
  throw Error("unknown rewrite mode: " + name);
}

ExamQuestion rewrite_open_ended(const ExamQuestion& question, RewriteMode mode,
                                const prompts::PromptRegistry& registry,
                                backend::Backend& backend, const std::string& model,
                                const std::vector<std::string>& cues) {
  if (trim(question.stem).empty()) throw Error("question stem must be non-empty");

  ExamQuestion result = question;
  bool option_bound = false;
  for (const auto& cue : cues) {
    if (question.stem.find(cue) != std::string::npos) {
      option_bound = true;
      break;
    }
  }
  if (!option_bound) {
    result.open_ended_stem = question.stem;
    return result;
  }

  const auto id = mode == RewriteMode::last_sentence ? prompts::PromptId::rewrite_last
                                                     : prompts::PromptId::rewrite_full;
  backend::ChatRequest request;
  request.model = model;
  request.messages = {{backend::WireRole::user,
                       registry.render(id, {{"question", question.stem}})}};
  request.params = registry.params_for(id);
  const std::string rewritten = trim(backend.complete(request).at(0));

  if (mode == RewriteMode::last_sentence) {
    const auto before = split_sentences(question.stem);
    const auto after = split_sentences(rewritten);
    if (after.size() < before.size()) {
      throw RewriteDriftError("question " + question.id +
                              ": rewrite dropped a sentence before the final one");
    }
    for (size_t i = 0; i + 1 < before.size(); ++i) {
      if (before[i] != after[i]) {
        throw RewriteDriftError("question " + question.id + ": rewrite changed sentence " +
                                std::to_string(i + 1) + ", which is not the final one");
      }
    }
  }
  result.open_ended_stem = rewritten;
  return result;
}

SplitResult split_by_area(const std::vector<ExamQuestion>& questions,
                          const std::set<std::string>& dev_areas) {
  SplitResult result;
  for (const auto& question : questions) {
    if (!question.area || question.area->empty()) {
      throw SplitError("question " + question.id + " has no area");
    }
    if (dev_areas.count(*question.area)) {
      result.dev.push_back(question);
    } else {
      result.test.push_back(question);
    }
  }
  return result;
}

const std::set<std::string>& nejm_dev_areas() {
  static const std::set<std::string> areas = {
      "Reproductive",   "Gastrointestinal", "Neurologic/Psychogenic",
      "Special Sensory", "Endocrine",        "Musculoskeletal",
      "Maternity Care",
  };
  return areas;
}

std::vector<ExamQuestion> sample_questions(const std::vector<ExamQuestion>& questions,
                                           size_t count, uint64_t seed) {
  if (count >= questions.size()) return questions;
  std::mt19937_64 rng(seed);
  std::vector<ExamQuestion> sample;
  size_t needed = count;
  size_t remaining = questions.size();
  for (const auto& question : questions) {
    std::uniform_int_distribution<size_t> pick(0, remaining - 1);
    if (pick(rng) < needed) {
      sample.push_back(question);
      --needed;
      if (needed == 0) break;
    }
    --remaining;
  }
  return sample;
}

}  // namespace dera::datasets
