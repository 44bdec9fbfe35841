#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "dera/strings.hpp"
#include "dera/types.hpp"
#include "dera/voting.hpp"

using namespace dera;

TEST_CASE("trim strips surrounding whitespace only") {
  CHECK(trim("  hello  ") == "hello");
  CHECK(trim("\t a b \r\n") == "a b");
  CHECK(trim("") == "");
  CHECK(trim(" \n\t ") == "");
  CHECK(trim("x") == "x");
}

TEST_CASE("split_lines handles crlf and trailing newlines") {
  CHECK(split_lines("a\nb\nc") == std::vector<std::string>{"a", "b", "c"});
  CHECK(split_lines("a\r\nb\r\n") == std::vector<std::string>{"a", "b", ""});
  CHECK(split_lines("") == std::vector<std::string>{""});
  CHECK(split_lines("\n") == std::vector<std::string>{"", ""});
  CHECK(split_lines("one") == std::vector<std::string>{"one"});
}

TEST_CASE("whitespace_tokens splits on any whitespace run") {
  CHECK(whitespace_tokens("a  b\tc\nd") == std::vector<std::string>{"a", "b", "c", "d"});
  CHECK(whitespace_tokens("   ") == std::vector<std::string>{});
}

TEST_CASE("format_percent drops the decimal for integral values") {
  CHECK(format_percent(4, 5) == "80%");
  CHECK(format_percent(1, 1) == "100%");
  CHECK(format_percent(0, 5) == "0%");
  CHECK(format_percent(1, 3) == "33.3%");
  CHECK(format_percent(2, 3) == "66.7%");
  CHECK(format_percent(1, 8) == "12.5%");
}

TEST_CASE("transcript enforces alternating agent roles") {
  DialogTranscript transcript;
  transcript.append(Role::agent_decider, "draft");
  transcript.append(Role::agent_researcher, "question");
  transcript.append(Role::agent_decider, "answer");
  CHECK(transcript.messages.size() == 3);
  CHECK(transcript.messages[0].turn_index == 0);
  CHECK(transcript.messages[2].turn_index == 2);
  CHECK(transcript.count_role(Role::agent_decider) == 2);
  CHECK(transcript.count_role(Role::agent_researcher) == 1);

  CHECK_THROWS_AS(transcript.append(Role::agent_decider, "again"), Error);
  CHECK_THROWS_AS(transcript.append(Role::system, "nope"), Error);
  CHECK_THROWS_AS(transcript.append(Role::agent_researcher, "   "), Error);
}

TEST_CASE("generation params validate ranges") {
  GenerationParams params;
  CHECK_NOTHROW(params.validate());
  params.temperature = -0.1;
  CHECK_THROWS_AS(params.validate(), Error);
  params.temperature = 1.0;
  params.num_completions = 0;
  CHECK_THROWS_AS(params.validate(), Error);
  params.num_completions = 1;
  params.turn_budget = 0;
  CHECK_THROWS_AS(params.validate(), Error);
  params.turn_budget = 15;
  CHECK_NOTHROW(params.validate());
}

TEST_CASE("corruption magnitudes sit on the 0 to 10 scale") {
  CHECK(corruption_magnitude(CorruptionLevel::low) == 3);
  CHECK(corruption_magnitude(CorruptionLevel::medium) == 5);
  CHECK(corruption_magnitude(CorruptionLevel::high) == 7);
  CHECK(corruption_level_from_string("medium") == CorruptionLevel::medium);
  CHECK_THROWS_AS(corruption_level_from_string("extreme"), Error);
}

TEST_CASE("vote_distribution trims and keeps first-occurrence order") {
  const auto tally = vote_distribution({"UTI ", "cystitis", " UTI", "uti", "cystitis"});
  REQUIRE(tally.entries.size() == 3);
  CHECK(tally.entries[0].text == "UTI");
  CHECK(tally.entries[0].count == 2);
  CHECK(tally.entries[1].text == "cystitis");
  CHECK(tally.entries[1].count == 2);
  CHECK(tally.entries[2].text == "uti");
  CHECK(tally.entries[2].count == 1);
  CHECK(tally.total() == 5);
  CHECK(tally.fraction(0) == doctest::Approx(0.4));
  CHECK(tally.top().text == "UTI");
}

TEST_CASE("vote_distribution rejects an empty ballot") {
  CHECK_THROWS_AS(vote_distribution({}), EmptyBallot);
  VoteTally empty;
  CHECK_THROWS_AS(empty.top(), EmptyBallot);
}

TEST_CASE("majority_vote breaks ties toward the earliest form") {
  CHECK(majority_vote({"a", "b", "b", "a", "c"}) == "a");
  CHECK(majority_vote({"b", "a", "a", "b"}) == "b");
  CHECK(majority_vote({"x"}) == "x");
  CHECK(majority_vote({"z", "y", "z"}) == "z");
}

TEST_CASE("majority_vote winner always holds a maximal count") {
  std::mt19937_64 rng(7);
  const std::vector<std::string> forms = {"alpha", "beta", "gamma", "delta"};
  for (int round = 0; round < 200; ++round) {
    std::vector<std::string> ballot;
    const int n = 1 + static_cast<int>(rng() % 9);
    for (int i = 0; i < n; ++i) ballot.push_back(forms[rng() % forms.size()]);
    const auto winner = majority_vote(ballot);
    const auto tally = vote_distribution(ballot);
    int max_count = 0;
    for (const auto& entry : tally.entries) max_count = std::max(max_count, entry.count);
    for (const auto& entry : tally.entries) {
      if (entry.count == max_count) {
        CHECK(entry.text == winner);
        break;
      }
    }
  }
}

TEST_CASE("scratchpad collapses only consecutive byte-identical accepts") {
  Scratchpad pad;
  pad = scratchpad_append(pad, {DecisionKind::accept, "add fever"});
  pad = scratchpad_append(pad, {DecisionKind::accept, "add fever"});
  CHECK(pad.entries == std::vector<std::string>{"add fever"});

  pad = scratchpad_append(pad, {DecisionKind::reject, "drop cough"});
  CHECK(pad.entries == std::vector<std::string>{"add fever"});

  pad = scratchpad_append(pad, {DecisionKind::accept, "add Fever"});
  CHECK(pad.entries == std::vector<std::string>{"add fever", "add Fever"});

  pad = scratchpad_append(pad, {DecisionKind::accept, "add fever"});
  CHECK(pad.entries ==
        std::vector<std::string>{"add fever", "add Fever", "add fever"});
}
