#include "adaptq/question.hpp"

#include "adaptq/errors.hpp"
#include "adaptq/util.hpp"

#include <cctype>
#include <charconv>

namespace adaptq {

using nlohmann::json;

char to_char(Label label) { return static_cast<char>('a' + static_cast<int>(label)); }

std::size_t index_of(Label label) { return static_cast<std::size_t>(label); }

std::optional<Label> label_from_char(char c) {
  char lower = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower < 'a' || lower > 'd') return std::nullopt;
  return static_cast<Label>(lower - 'a');
}

std::optional<Label> label_from_string(std::string_view s) {
  if (s.size() != 1) return std::nullopt;
  return label_from_char(s[0]);
}

bool Question::same_content(const Question& other) const {
  return chapter == other.chapter && stem == other.stem && options == other.options &&
         answer == other.answer && difficulty == other.difficulty &&
         explanation == other.explanation;
}

namespace {

void require_single_line(const std::string& field, const char* name) {
  if (field.empty()) throw ValidationError(std::string(name) + " is empty");
  if (field.find_first_of("\r\n") != std::string::npos) {
    throw ValidationError(std::string(name) + " spans multiple lines");
  }
  if (trim(field) != field) {
    throw ValidationError(std::string(name) + " has surrounding whitespace");
  }
}

}  // namespace

void validate_question(const Question& q) {
  require_single_line(q.stem, "stem");
  for (const auto& option : q.options) require_single_line(option, "option");
  if (q.difficulty < kMinDifficulty || q.difficulty > kMaxDifficulty) {
    throw InvalidDifficulty(q.difficulty);
  }
  if (q.explanation) require_single_line(*q.explanation, "explanation");
}

std::string content_id(const Question& q) {
  std::string key = q.chapter.subject + '\x1f' + q.chapter.chapter + '\x1f' +
                    render_question_block(q);
  return "q-" + hex64(fnv1a64(key));
}

namespace {

struct OptionLine {
  char letter;
  std::string text;
};

// "a) text", "B. text"; the delimiter must be followed by a space or the end.
std::optional<OptionLine> match_option(const std::string& line) {
  if (line.size() < 2) return std::nullopt;
  if (!std::isalpha(static_cast<unsigned char>(line[0]))) return std::nullopt;
  if (line[1] != ')' && line[1] != '.') return std::nullopt;
  if (line.size() > 2 && !std::isspace(static_cast<unsigned char>(line[2]))) {
    return std::nullopt;
  }
  return OptionLine{static_cast<char>(std::tolower(static_cast<unsigned char>(line[0]))),
                    trim(std::string_view(line).substr(2))};
}

std::optional<std::string> match_field(const std::string& line, std::string_view key) {
  if (!starts_with_ci(line, key)) return std::nullopt;
  return trim(std::string_view(line).substr(key.size()));
}

bool is_header(const std::string& line) { return starts_with_ci(line, "question:"); }

int parse_difficulty(const std::string& raw, std::size_t index) {
  if (raw.empty()) throw MalformedBlock(index, "missing difficulty value");
  int value = 0;
  const char* begin = raw.data();
  const char* end = raw.data() + raw.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec == std::errc::result_out_of_range) {
    throw MalformedBlock(index, "difficulty outside 1..5");
  }
  if (ec != std::errc() || ptr != end) {
    throw MalformedBlock(index, "non-integer difficulty '" + raw + "'");
  }
  if (value < kMinDifficulty || value > kMaxDifficulty) {
    throw MalformedBlock(index, "difficulty outside 1..5");
  }
  return value;
}

Label parse_answer(std::string raw, std::size_t index) {
  if (!raw.empty() && (raw.front() == '"' || raw.front() == '\'')) raw.erase(0, 1);
  if (!raw.empty() && raw.front() == '(') raw.erase(0, 1);
  if (raw.empty()) throw MalformedBlock(index, "missing answer label");
  bool label_only = raw.size() == 1;
  bool delimited = raw.size() > 1 && (raw[1] == ')' || raw[1] == '.' || raw[1] == ':' ||
                                      std::isspace(static_cast<unsigned char>(raw[1])) ||
                                      raw[1] == '"' || raw[1] == '\'');
  if (!(label_only || delimited)) {
    throw MalformedBlock(index, "answer label not in {a..d}");
  }
  auto label = label_from_char(raw[0]);
  if (!label) throw MalformedBlock(index, "answer label not in {a..d}");
  return *label;
}

class BlockParser {
 public:
  BlockParser(std::vector<std::string> lines, const ChapterRef& chapter)
      : lines_(std::move(lines)), chapter_(chapter) {}

  std::vector<Question> run() {
    std::vector<Question> out;
    skip_blank();
    if (at_end()) throw MalformedBlock(0, "no question header");
    while (!at_end()) {
      std::size_t index = out.size();
      if (!is_header(current())) {
        throw MalformedBlock(index, "expected 'Question:' header");
      }
      out.push_back(parse_one(index));
      skip_blank();
    }
    return out;
  }

 private:
  bool at_end() const { return pos_ >= lines_.size(); }
  const std::string& current() const { return lines_[pos_]; }
  void skip_blank() {
    while (!at_end() && current().empty()) ++pos_;
  }
  // Advances to the next non-blank line; returns false at end of input.
  bool next_content() {
    ++pos_;
    skip_blank();
    return !at_end();
  }

  Question parse_one(std::size_t index) {
    Question q;
    q.chapter = chapter_;
    q.stem = *match_field(current(), "question:");

    while (next_content() && !match_option(current()) && !is_header(current()) &&
           !match_field(current(), "answer:") && !match_field(current(), "difficulty rating:")) {
      q.stem = q.stem.empty() ? current() : q.stem + " " + current();
    }
    if (q.stem.empty()) throw MalformedBlock(index, "empty question stem");
    if (at_end() || !match_option(current())) {
      throw MalformedBlock(index, "wrong option count: expected 4, found 0");
    }

    std::size_t count = 0;
    while (!at_end()) {
      auto option = match_option(current());
      if (!option) break;
      if (count == 4) throw MalformedBlock(index, "wrong option count: more than 4 options");
      char expected = static_cast<char>('a' + count);
      if (option->letter != expected) {
        if (option->letter > 'd') {
          throw MalformedBlock(index, "wrong option count: unexpected option '" +
                                          std::string(1, option->letter) + "'");
        }
        throw MalformedBlock(index, "option '" + std::string(1, option->letter) +
                                        "' out of order, expected '" +
                                        std::string(1, expected) + "'");
      }
      if (option->text.empty()) throw MalformedBlock(index, "empty option text");
      q.options[count++] = option->text;
      next_content();
    }
    if (count != 4) {
      throw MalformedBlock(index,
                           "wrong option count: expected 4, found " + std::to_string(count));
    }

    auto answer = at_end() ? std::nullopt : match_field(current(), "answer:");
    if (!answer) throw MalformedBlock(index, "missing Answer line");
    q.answer = parse_answer(*answer, index);
    next_content();

    auto difficulty = at_end() ? std::nullopt : match_field(current(), "difficulty rating:");
    if (!difficulty) throw MalformedBlock(index, "missing Difficulty rating line");
    q.difficulty = parse_difficulty(*difficulty, index);
    next_content();

    if (!at_end()) {
      if (auto explanation = match_field(current(), "explanation:")) {
        std::string text = *explanation;
        while (next_content() && !is_header(current())) {
          text = text.empty() ? current() : text + " " + current();
        }
        if (text.empty()) throw MalformedBlock(index, "empty explanation");
        q.explanation = std::move(text);
      } else if (!is_header(current())) {
        throw MalformedBlock(index, "unexpected line after difficulty rating");
      }
    }
    q.id = content_id(q);
    return q;
  }

  std::vector<std::string> lines_;
  ChapterRef chapter_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<Question> parse_question_block(std::string_view text, const ChapterRef& chapter) {
  std::vector<std::string> lines = split_lines(text);
  for (auto& line : lines) line = trim(line);
  return BlockParser(std::move(lines), chapter).run();
}

std::string render_question_block(const Question& q) {
  std::string out = "Question: " + q.stem + "\n";
  for (Label label : kLabels) {
    out += to_char(label);
    out += ") " + q.options[index_of(label)] + "\n";
  }
  out += "Answer: ";
  out += to_char(q.answer);
  out += ") " + q.answer_text() + "\n";
  out += "Difficulty rating: " + std::to_string(q.difficulty);
  if (q.explanation) out += "\nExplanation: " + *q.explanation;
  return out;
}

std::string render_question_blocks(const std::vector<Question>& questions) {
  std::string out;
  for (std::size_t i = 0; i < questions.size(); ++i) {
    if (i > 0) out += "\n\n";
    out += render_question_block(questions[i]);
  }
  return out;
}

std::string normalize_stem(std::string_view stem) {
  std::string collapsed;
  bool pending_space = false;
  for (unsigned char c : stem) {
    if (std::isspace(c)) {
      pending_space = !collapsed.empty();
      continue;
    }
    if (pending_space) collapsed.push_back(' ');
    pending_space = false;
    collapsed.push_back(static_cast<char>(std::tolower(c)));
  }
  auto strip = [](unsigned char c) { return std::ispunct(c) || std::isspace(c); };
  std::size_t begin = 0;
  std::size_t end = collapsed.size();
  while (begin < end && strip(static_cast<unsigned char>(collapsed[begin]))) ++begin;
  while (end > begin && strip(static_cast<unsigned char>(collapsed[end - 1]))) --end;
  return collapsed.substr(begin, end - begin);
}

bool is_duplicate(const Question& a, const Question& b) {
  return normalize_stem(a.stem) == normalize_stem(b.stem);
}

json question_to_json(const Question& q) {
  json doc = {{"id", q.id},
              {"chapter", chapter_to_json(q.chapter)},
              {"stem", q.stem},
              {"options", q.options},
              {"answer", std::string(1, to_char(q.answer))},
              {"difficulty", q.difficulty}};
  if (q.explanation) doc["explanation"] = *q.explanation;
  return doc;
}

Question question_from_json(const json& doc) {
  Question q;
  try {
    q.chapter = chapter_from_json(doc.at("chapter"));
    q.stem = doc.at("stem").get<std::string>();
    auto options = doc.at("options").get<std::vector<std::string>>();
    if (options.size() != 4) throw ValidationError("question needs exactly 4 options");
    std::copy(options.begin(), options.end(), q.options.begin());
    auto label = label_from_string(doc.at("answer").get<std::string>());
    if (!label) throw ValidationError("answer label not in {a..d}");
    q.answer = *label;
    q.difficulty = doc.at("difficulty").get<int>();
    if (doc.contains("explanation") && !doc["explanation"].is_null()) {
      q.explanation = doc["explanation"].get<std::string>();
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad question record: ") + e.what());
  }
  validate_question(q);
  q.id = doc.contains("id") ? doc["id"].get<std::string>() : content_id(q);
  return q;
}

}  // namespace adaptq
