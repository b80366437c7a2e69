#include "doctest.h"

#include "adaptq/errors.hpp"
#include "adaptq/prompting.hpp"
#include "support.hpp"

using namespace adaptq;
using nlohmann::json;

namespace {

std::size_t occurrences(const std::string& haystack, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string::npos;
       pos = haystack.find(needle, pos + needle.size())) {
    ++n;
  }
  return n;
}

PromptBuilder algebra_builder() { return {testing::grade9_algebra(), testing::templates()}; }

std::vector<Question> level_questions(int level, int count) {
  std::vector<Question> out;
  for (int i = 0; i < count; ++i) {
    Question q = testing::make_question(testing::word_problems(),
                                        "Level " + std::to_string(level) + " problem " +
                                            std::to_string(i),
                                        kLabels[static_cast<std::size_t>(i % 4)], level);
    q.explanation = "Because of step " + std::to_string(i) + ".";
    out.push_back(q);
  }
  return out;
}

}  // namespace

TEST_CASE("generation prompt reproduces the example request") {
  PromptBuilder builder = algebra_builder();
  ChapterRef chapter{"Algebra", "Identify equivalent linear expressions"};
  std::vector<Question> previous{
      testing::make_question(chapter, "Which of the following expressions is equivalent to 3x + 2y?"),
      testing::make_question(chapter, "Identify the equivalent expression for 4a - 2b.")};
  auto messages = builder.generation_prompt(chapter, 3, 2, previous);
  REQUIRE(messages.size() == 1);
  CHECK(messages[0].role == Role::User);
  const std::string& text = messages[0].content;
  CHECK(text.starts_with(
      "Please create two 4-choice questions for the grade 9 course in 'Algebra' and the chapter "
      "'Identify equivalent linear expressions' at a difficulty level of 3. Provide the answer for "
      "each question and confirm the difficulty rating is 3."));
  CHECK(text.find("different from previous ones") != std::string::npos);
  CHECK(text.find("Previous question 1: \"Which of the following expressions is equivalent to "
                  "3x + 2y?\" (Difficulty level: 1)") != std::string::npos);
  CHECK(text.find("Previous question 2: \"Identify the equivalent expression for 4a - 2b.\" "
                  "(Difficulty level: 1)") != std::string::npos);
  CHECK(text.find("maximum difficulty level is set to 5") != std::string::npos);
  for (const auto& q : previous) CHECK(occurrences(text, q.stem) == 1);
}

TEST_CASE("single generation prompt follows the fine-tune request form") {
  PromptBuilder builder(testing::grade9_math(), testing::templates());
  auto messages = builder.generation_prompt(testing::powers(), 1, 1, {});
  REQUIRE(messages.size() == 1);
  CHECK(messages[0].content.starts_with(
      "Create a question for grade 9 course in 'Numbers', chapter: 'Powers with decimal and "
      "fractional bases', with difficulty level 1."));
  CHECK(messages[0].content.find("previous") == std::string::npos);
  CHECK(messages[0].content.find("Difficulty rating:") != std::string::npos);
  CHECK(builder.finetune_request(testing::powers(), 1) ==
        "Create a question for grade 9 course in 'Numbers', chapter: 'Powers with decimal and "
        "fractional bases', with difficulty level 1.");
}

TEST_CASE("generation prompt checks its arguments") {
  PromptBuilder builder(testing::grade9_math(), testing::templates());
  CHECK_THROWS_AS(builder.generation_prompt(testing::powers(), 6, 1, {}), InvalidDifficulty);
  CHECK_THROWS_AS(builder.generation_prompt(testing::powers(), 0, 1, {}), InvalidDifficulty);
  CHECK_THROWS_AS(builder.generation_prompt(testing::powers(), 1, 0, {}), ValidationError);
  CHECK_THROWS(builder.generation_prompt({"Numbers", "Simple interest"}, 1, 1, {}));
}

TEST_CASE("repeated previous stems appear once") {
  PromptBuilder builder = algebra_builder();
  Question q = testing::make_question(testing::word_problems(), "Same stem?");
  Question q2 = q;
  q2.stem = "same stem";
  auto text = builder.generation_prompt(testing::word_problems(), 2, 1, {q, q2})[0].content;
  CHECK(occurrences(text, "Previous question 1:") == 1);
  CHECK(occurrences(text, "Previous question 2:") == 0);
}

TEST_CASE("zero-shot student prompt withholds the answer") {
  PromptBuilder builder(testing::grade9_math(), testing::templates());
  Question q = testing::figure1_question();
  auto messages = builder.student_prompt(q, TeachingMode::zero_shot());
  REQUIRE(messages.size() == 1);
  const std::string& text = messages[0].content;
  CHECK(text.find(q.stem) != std::string::npos);
  for (const auto& option : q.options) CHECK(text.find(option) != std::string::npos);
  CHECK(text.find("single option letter") != std::string::npos);
  CHECK(text.find("2.25 Answer") == std::string::npos);
  CHECK(text.find("Answer: a) 2.25") == std::string::npos);
  CHECK(text.find("Answer:") == std::string::npos);
  CHECK(builder.student_prompt(q, TeachingMode::zero_shot()) == messages);
}

TEST_CASE("teaching prompts carry example answers but not the target's") {
  PromptBuilder builder = algebra_builder();
  auto examples = level_questions(2, 3);
  Question target = testing::make_question(testing::word_problems(), "Target problem", Label::D, 2);

  auto plain = builder.student_prompt(target, TeachingMode::with_examples(examples));
  std::string text;
  for (const auto& m : plain) text += m.content + "\n";
  for (const auto& e : examples) {
    std::string line = std::string("Answer: ") + to_char(e.answer) + ") " + e.answer_text();
    CHECK(occurrences(text, line) == 1);
  }
  CHECK(occurrences(text, "Answer: ") == 3);
  CHECK(occurrences(text, "Explanation: ") == 0);
  CHECK(text.find("Answer: d) " + target.answer_text()) == std::string::npos);

  auto explained = builder.student_prompt(target, TeachingMode::with_explanations(examples));
  text.clear();
  for (const auto& m : explained) text += m.content + "\n";
  CHECK(occurrences(text, "Answer: ") == 3);
  CHECK(occurrences(text, "Explanation: ") == 3);
  for (const auto& e : examples) CHECK(text.find(*e.explanation) != std::string::npos);
}

TEST_CASE("teaching modes check their examples") {
  PromptBuilder builder = algebra_builder();
  auto examples = level_questions(1, 3);
  examples[1].explanation.reset();
  Question target = testing::make_question(testing::word_problems(), "Target");
  CHECK_THROWS_AS(builder.student_prompt(target, TeachingMode::with_explanations(examples)),
                  MissingExplanation);
  CHECK_THROWS_AS(builder.student_prompt(target, TeachingMode::with_examples(level_questions(1, 2))),
                  ValidationError);
}

TEST_CASE("explanation prompt") {
  PromptBuilder builder(testing::grade9_math(), testing::templates());
  auto messages = builder.explanation_prompt(testing::figure1_question());
  REQUIRE(messages.size() == 1);
  CHECK(messages[0].content.find("2-4 sentences") != std::string::npos);
  CHECK(messages[0].content.find("Answer: a) 2.25") != std::string::npos);
}

TEST_CASE("student reply fixture") {
  Question q = testing::figure1_question();
  auto cases = json::parse(read_file(testing::fixture("student-replies.json")));
  REQUIRE(cases.size() == 20);
  for (const auto& c : cases) {
    std::string reply = c["reply"].get<std::string>();
    CAPTURE(reply);
    if (c["label"].is_null()) {
      CHECK_THROWS_AS(parse_student_answer(reply, q), UnparseableAnswer);
    } else {
      CHECK(to_char(parse_student_answer(reply, q)) == c["label"].get<std::string>()[0]);
    }
  }
}

TEST_CASE("conflicting labels are reported as such") {
  try {
    parse_student_answer("It could be a or maybe c", testing::figure1_question());
    FAIL("expected UnparseableAnswer");
  } catch (const UnparseableAnswer& e) {
    CHECK(e.reason().find("conflicting") != std::string::npos);
  }
}

TEST_CASE("template expansion") {
  CHECK(expand_template("a {x} b", {{"x", "1"}}) == "a 1 b");
  CHECK(expand_template("one\n{gone}\ntwo", {{"gone", ""}}) == "one\ntwo");
  CHECK_THROWS(expand_template("{missing}", {}));
  CHECK_THROWS(expand_template("{open", {{"open", "x"}}));
  CHECK(count_word(2) == "two");
  CHECK(count_word(10) == "ten");
  CHECK(count_word(12) == "12");
}

TEST_CASE("messages JSON round trip") {
  std::vector<ChatMessage> m{{Role::System, "s"}, {Role::User, "u"}, {Role::Assistant, "a"}};
  CHECK(messages_from_json(messages_to_json(m)) == m);
  CHECK(messages_to_json(m)[1] == json{{"role", "user"}, {"content", "u"}});
}
