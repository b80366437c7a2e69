#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "adaptq/curriculum.hpp"
#include "json.hpp"

namespace adaptq {

enum class Label : std::uint8_t { A = 0, B = 1, C = 2, D = 3 };

inline constexpr std::array<Label, 4> kLabels{Label::A, Label::B, Label::C, Label::D};
inline constexpr int kMinDifficulty = 1;
inline constexpr int kMaxDifficulty = 5;

char to_char(Label label);
std::size_t index_of(Label label);
// Accepts a-d in either case; anything else yields nullopt.
std::optional<Label> label_from_char(char c);
std::optional<Label> label_from_string(std::string_view s);

// One four-option multiple-choice item.
struct Question {
  std::string id;
  ChapterRef chapter;
  std::string stem;
  std::array<std::string, 4> options;
  Label answer = Label::A;
  int difficulty = kMinDifficulty;
  std::optional<std::string> explanation;

  const std::string& answer_text() const { return options[index_of(answer)]; }

  // Field equality ignoring `id`.
  bool same_content(const Question& other) const;
  bool operator==(const Question&) const = default;
};

// Throws ValidationError when the question cannot be rendered in the block
// grammar: empty or multi-line fields, difficulty out of range.
void validate_question(const Question& q);

// Content-derived identifier, stable across runs ("q-" + 16 hex digits).
std::string content_id(const Question& q);

// Parses one or more blocks of the form
//
//   Question: <stem>
//   a) <text>   (through d)
//   Answer: <label>[) <text>]
//   Difficulty rating: <1..5>
//   [Explanation: <text>]
//
// Lines are trimmed, blank lines separate nothing in particular, and
// continuation lines extend the stem or explanation. Throws MalformedBlock
// with the zero-based index of the offending block.
std::vector<Question> parse_question_block(std::string_view text, const ChapterRef& chapter);

std::string render_question_block(const Question& q);
std::string render_question_blocks(const std::vector<Question>& questions);

// Stem lowercased, whitespace collapsed, punctuation stripped at both ends.
std::string normalize_stem(std::string_view stem);
bool is_duplicate(const Question& a, const Question& b);

nlohmann::json question_to_json(const Question& q);
Question question_from_json(const nlohmann::json& doc);

}  // namespace adaptq
