#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "dera/datasets.hpp"
#include "support/test_util.hpp"

using namespace dera;
using namespace dera::datasets;

TEST_CASE("encounters load with optional fields and round-trip") {
  const auto encounters = load_encounters(testutil::data_path("encounters.jsonl"));
  REQUIRE(encounters.size() == 3);
  CHECK(encounters[0].id == "enc-001");
  CHECK(encounters[0].age == 34);
  CHECK(encounters[0].reason_for_visit == "sore throat");
  CHECK(encounters[2].reason_for_visit == "");
  CHECK(encounters[2].dialog.size() == 2);

  for (const auto& encounter : encounters) {
    CHECK(encounter_from_json(encounter_to_json(encounter)) == encounter);
  }
}

TEST_CASE("a malformed line reports its line number") {
  try {
    load_encounters(testutil::data_path("encounters_bad.jsonl"));
    FAIL("expected IngestError");
  } catch (const IngestError& e) {
    CHECK(e.line == 2);
    CHECK(std::string(e.what()).find("age") != std::string::npos);
  }
}

TEST_CASE("dialog_text renders one speaker-tagged line per turn") {
  const auto encounters = load_encounters(testutil::data_path("encounters.jsonl"));
  const auto text = dialog_text(encounters[1]);
  CHECK(text ==
        "patient: I need a refill on my lisinopril.\n"
        "provider: How have your blood pressure readings been at home?\n"
        "patient: Mostly around 130 over 85.");
}

TEST_CASE("corpus stats count turns and whitespace tokens") {
  const auto encounters = load_encounters(testutil::data_path("encounters.jsonl"));
  const auto stats = corpus_stats(encounters);
  CHECK(stats.encounters == 3);
  CHECK(stats.turns_min == 2);
  CHECK(stats.turns_max == 4);
  CHECK(stats.turns_mean == doctest::Approx(3.0));
  CHECK(stats.tokens_min > 0);
  CHECK(stats.tokens_mean > stats.tokens_min);
  CHECK_THROWS_AS(corpus_stats({}), EmptyCorpus);
}

TEST_CASE("summary text round-trips through the six headings") {
  StructuredSummary summary;
  summary.demographics_social = "34-year-old female, lives alone.";
  summary.medical_intent = "Evaluation of sore throat.";
  summary.pertinent_positives = "Sore throat for three days.\nPain with swallowing.";
  summary.pertinent_negatives = "No cough.";
  summary.medical_history = "None reported.";

  const auto text = summary_text(summary);
  CHECK(text.find("Demographics and Social Determinants of Health:") != std::string::npos);
  CHECK(text.find("Pertinent Unknowns:") != std::string::npos);
  CHECK(parse_summary_text(text) == summary);
  CHECK(summary_from_json(summary_to_json(summary)) == summary);
}

TEST_CASE("summary parsing skips a preamble and accepts any heading order") {
  const std::string text =
      "Here is the revised summary.\n\n"
      "Medical Intent:\nRefill request.\n\n"
      "Demographics and Social Determinants of Health:\n58-year-old male.\n\n"
      "Pertinent Positives:\n\nPertinent Negatives:\n\nPertinent Unknowns:\n\n"
      "Medical History:\nHypertension.";
  const auto summary = parse_summary_text(text);
  CHECK(summary.medical_intent == "Refill request.");
  CHECK(summary.demographics_social == "58-year-old male.");
  CHECK(summary.pertinent_positives == "");
  CHECK(summary.medical_history == "Hypertension.");
}

TEST_CASE("summary parsing rejects missing or duplicate headings") {
  CHECK_THROWS_AS(parse_summary_text("Medical Intent:\nRefill."), Error);
  StructuredSummary summary;
  auto text = summary_text(summary);
  text += "\n\nMedical Intent:\nAgain.";
  CHECK_THROWS_AS(parse_summary_text(text), Error);
}

TEST_CASE("care plan text round-trips through the five headings") {
  CarePlan plan;
  plan.medications = "Start amoxicillin 500 mg three times daily.";
  plan.tests = "Rapid strep test.";
  plan.supportive_care = "Salt water gargles.";
  const auto text = careplan_text(plan);
  CHECK(text.find("Medications:") != std::string::npos);
  CHECK(text.find("Referrals:") != std::string::npos);
  CHECK(parse_careplan_text(text) == plan);
  CHECK(careplan_from_json(careplan_to_json(plan)) == plan);
}

TEST_CASE("split_sentences respects terminators, groups, and runs") {
  CHECK(split_sentences("One. Two? Three!") ==
        std::vector<std::string>{"One.", "Two?", "Three!"});
  CHECK(split_sentences("He said it (e.g. twice). Then left.") ==
        std::vector<std::string>{"He said it (e.g. twice).", "Then left."});
  CHECK(split_sentences("Really?! Yes.") == std::vector<std::string>{"Really?!", "Yes."});
  CHECK(split_sentences("Values [1. 2. 3.] hold. Done.") ==
        std::vector<std::string>{"Values [1. 2. 3.] hold.", "Done."});
  CHECK(split_sentences("No terminator at all") ==
        std::vector<std::string>{"No terminator at all"});
  CHECK(split_sentences("Ends cleanly.") == std::vector<std::string>{"Ends cleanly."});
  CHECK(split_sentences("") == std::vector<std::string>{});
}

TEST_CASE("questions load with option and gold validation") {
  const auto questions = load_questions(testutil::data_path("questions.jsonl"));
  REQUIRE(questions.size() == 3);
  CHECK(questions[0].options.size() == 5);
  CHECK(questions[0].gold_letter == "A");
  CHECK(questions[1].options.empty());
  CHECK(!questions[1].gold_letter);

  for (const auto& question : questions) {
    CHECK(question_from_json(question_to_json(question)) == question);
  }

  auto bad = question_to_json(questions[0]);
  bad["options"]["F"] = "Too far";
  CHECK_THROWS_AS(question_from_json(bad), Error);

  bad = question_to_json(questions[0]);
  bad["gold_letter"] = "B";
  CHECK_THROWS_AS(question_from_json(bad), Error);

  bad = question_to_json(questions[0]);
  bad.erase("gold_letter");
  CHECK_THROWS_AS(question_from_json(bad), Error);
}

TEST_CASE("rewrite passes an open-ended stem through untouched") {
  const auto questions = load_questions(testutil::data_path("questions.jsonl"));
  testutil::CapturingBackend backend;
  const auto open = rewrite_open_ended(questions[1], RewriteMode::last_sentence,
                                       testutil::registry(), backend, "gpt-4");
  CHECK(backend.requests.empty());
  CHECK(open.open_ended_stem == questions[1].stem);
}

TEST_CASE("rewrite replaces only the final sentence of a cued stem") {
  const auto questions = load_questions(testutil::data_path("questions.jsonl"));
  const auto& cued = questions[0];
  testutil::CapturingBackend backend;
  backend.enqueue(
      {"A 62-year-old man reports crushing chest pain radiating to his left arm. "
       "What is the most likely diagnosis?"});
  const auto open = rewrite_open_ended(cued, RewriteMode::last_sentence,
                                       testutil::registry(), backend, "gpt-4");
  REQUIRE(backend.requests.size() == 1);
  CHECK(open.open_ended_stem->find("What is the most likely diagnosis?") !=
        std::string::npos);

  const auto before = split_sentences(cued.stem);
  const auto after = split_sentences(*open.open_ended_stem);
  for (size_t i = 0; i + 1 < before.size(); ++i) CHECK(before[i] == after[i]);
}

TEST_CASE("rewrite drift in an earlier sentence is an error") {
  const auto questions = load_questions(testutil::data_path("questions.jsonl"));
  testutil::CapturingBackend backend;
  backend.enqueue(
      {"A 62-year-old man has chest pain. What is the most likely diagnosis?"});
  CHECK_THROWS_AS(rewrite_open_ended(questions[0], RewriteMode::last_sentence,
                                     testutil::registry(), backend, "gpt-4"),
                  RewriteDriftError);
}

TEST_CASE("full-stem rewrite skips the drift check") {
  const auto questions = load_questions(testutil::data_path("questions.jsonl"));
  testutil::CapturingBackend backend;
  backend.enqueue({"An older man has chest pain; name the most likely diagnosis."});
  const auto open = rewrite_open_ended(questions[0], RewriteMode::full,
                                       testutil::registry(), backend, "gpt-4");
  CHECK(*open.open_ended_stem ==
        "An older man has chest pain; name the most likely diagnosis.");
}

TEST_CASE("area split partitions and rejects missing areas") {
  auto questions = load_questions(testutil::data_path("questions.jsonl"));
  const auto split = split_by_area(questions, {"Cardiology"});
  CHECK(split.dev.size() == 1);
  CHECK(split.test.size() == 2);
  CHECK(split.dev[0].id == "q1");

  CHECK(nejm_dev_areas().count("Endocrine") == 1);
  CHECK(nejm_dev_areas().size() == 7);

  questions[1].area.reset();
  CHECK_THROWS_AS(split_by_area(questions, {"Cardiology"}), SplitError);
}

TEST_CASE("question sampling is seeded and order-preserving") {
  std::vector<ExamQuestion> questions;
  for (int i = 0; i < 50; ++i) {
    ExamQuestion q;
    q.id = "q" + std::to_string(i);
    q.stem = "Stem " + std::to_string(i) + "?";
    q.gold_text = "x";
    questions.push_back(q);
  }
  const auto first = sample_questions(questions, 10, 42);
  const auto second = sample_questions(questions, 10, 42);
  const auto other = sample_questions(questions, 10, 43);
  REQUIRE(first.size() == 10);
  CHECK(first == second);
  CHECK(first != other);

  size_t cursor = 0;
  for (const auto& picked : first) {
    while (cursor < questions.size() && !(questions[cursor] == picked)) ++cursor;
    CHECK(cursor < questions.size());
  }
  CHECK(sample_questions(questions, 200, 1).size() == 50);
}
