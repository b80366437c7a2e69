#include "adaptq/prompting.hpp"

#include "adaptq/errors.hpp"
#include "adaptq/util.hpp"

#include <array>
#include <cctype>
#include <regex>
#include <set>

namespace adaptq {

using nlohmann::json;

std::string_view to_string(Role role) {
  switch (role) {
    case Role::System:
      return "system";
    case Role::User:
      return "user";
    case Role::Assistant:
      return "assistant";
  }
  return "user";
}

Role role_from_string(std::string_view s) {
  if (s == "system") return Role::System;
  if (s == "user") return Role::User;
  if (s == "assistant") return Role::Assistant;
  throw ValidationError("unknown message role '" + std::string(s) + "'");
}

json messages_to_json(const std::vector<ChatMessage>& messages) {
  json out = json::array();
  for (const auto& m : messages) {
    out.push_back({{"role", std::string(to_string(m.role))}, {"content", m.content}});
  }
  return out;
}

std::vector<ChatMessage> messages_from_json(const json& doc) {
  std::vector<ChatMessage> out;
  for (const auto& item : doc) {
    out.push_back({role_from_string(item.at("role").get<std::string>()),
                   item.at("content").get<std::string>()});
  }
  return out;
}

std::string_view to_string(TeachingVariant variant) {
  switch (variant) {
    case TeachingVariant::ZeroShot:
      return "ZeroShot";
    case TeachingVariant::Examples:
      return "Examples";
    case TeachingVariant::ExamplesWithExplanations:
      return "ExamplesWithExplanations";
  }
  return "ZeroShot";
}

TeachingMode TeachingMode::with_examples(std::vector<Question> examples) {
  return {TeachingVariant::Examples, std::move(examples)};
}

TeachingMode TeachingMode::with_explanations(std::vector<Question> examples) {
  return {TeachingVariant::ExamplesWithExplanations, std::move(examples)};
}

namespace {

constexpr std::array<const char*, 8> kTemplateNames{
    "generation_one",          "generation_many", "previous_block",   "student",
    "student_examples",        "student_examples_explained", "finetune_request", "explanation"};

}  // namespace

TemplateSet TemplateSet::load(const std::filesystem::path& dir) {
  TemplateSet set;
  for (const char* name : kTemplateNames) {
    std::string text = read_file(dir / (std::string(name) + ".txt"));
    while (!text.empty() && std::isspace(static_cast<unsigned char>(text.back()))) {
      text.pop_back();
    }
    set.templates_[name] = std::move(text);
  }
  return set;
}

TemplateSet TemplateSet::load_default() { return load(default_data_dir() / "templates"); }

const std::string& TemplateSet::get(const std::string& name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw ValidationError("no template named '" + name + "'");
  return it->second;
}

std::string expand_template(std::string_view text,
                            const std::map<std::string, std::string>& values) {
  std::string out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t eol = text.find('\n', pos);
    bool last = eol == std::string_view::npos;
    std::string_view line = text.substr(pos, last ? std::string_view::npos : eol - pos);

    std::string expanded;
    bool sole_placeholder = false;
    for (std::size_t i = 0; i < line.size();) {
      if (line[i] == '{') {
        std::size_t close = line.find('}', i);
        if (close == std::string_view::npos) throw ValidationError("unterminated placeholder");
        std::string name(line.substr(i + 1, close - i - 1));
        auto it = values.find(name);
        if (it == values.end()) throw ValidationError("unfilled placeholder {" + name + "}");
        expanded += it->second;
        sole_placeholder = (i == 0 && close == line.size() - 1);
        i = close + 1;
      } else {
        expanded.push_back(line[i++]);
      }
    }
    if (!(sole_placeholder && expanded.empty())) {
      out += expanded;
      if (!last) out.push_back('\n');
    } else if (last && !out.empty() && out.back() == '\n') {
      out.pop_back();
    }
    if (last) break;
    pos = eol + 1;
  }
  return out;
}

std::string count_word(int count) {
  static constexpr std::array<const char*, 11> kWords{
      "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"};
  if (count >= 0 && count <= 10) return kWords[static_cast<std::size_t>(count)];
  return std::to_string(count);
}

PromptBuilder::PromptBuilder(Curriculum curriculum, TemplateSet templates)
    : curriculum_(std::move(curriculum)), templates_(std::move(templates)) {}

std::vector<ChatMessage> PromptBuilder::generation_prompt(
    const ChapterRef& chapter, int difficulty, int count,
    const std::vector<Question>& previous) const {
  if (difficulty < kMinDifficulty || difficulty > kMaxDifficulty) {
    throw InvalidDifficulty(difficulty);
  }
  if (count < 1) throw ValidationError("question count must be positive");
  int grade = curriculum_.grade_of(chapter);

  std::string previous_block;
  if (!previous.empty()) {
    std::set<std::string> seen;
    std::string list;
    std::size_t n = 0;
    for (const auto& q : previous) {
      if (!seen.insert(normalize_stem(q.stem)).second) continue;
      if (n > 0) list += "\n";
      list += "Previous question " + std::to_string(++n) + ": \"" + q.stem +
              "\" (Difficulty level: " + std::to_string(q.difficulty) + ")";
    }
    previous_block = expand_template(templates_.get("previous_block"), {{"previous_list", list}});
  }

  std::map<std::string, std::string> values{{"grade", std::to_string(grade)},
                                            {"subject", chapter.subject},
                                            {"chapter", chapter.chapter},
                                            {"count", count_word(count)},
                                            {"difficulty", std::to_string(difficulty)},
                                            {"previous_block", previous_block}};
  const auto& tmpl = templates_.get(count == 1 ? "generation_one" : "generation_many");
  return {{Role::User, expand_template(tmpl, values)}};
}

std::string render_question_for_student(const Question& q) {
  std::string out = "Question: " + q.stem;
  for (Label label : kLabels) {
    out += "\n";
    out += to_char(label);
    out += ") " + q.options[index_of(label)];
  }
  return out;
}

std::vector<ChatMessage> PromptBuilder::student_prompt(const Question& q,
                                                       const TeachingMode& mode) const {
  std::string examples_block;
  if (mode.variant == TeachingVariant::ZeroShot) {
    if (!mode.examples.empty()) throw ValidationError("zero-shot mode takes no examples");
  } else {
    if (mode.examples.size() != kTeachingExampleCount) {
      throw ValidationError("teaching mode needs exactly 3 examples, got " +
                            std::to_string(mode.examples.size()));
    }
    bool explain = mode.variant == TeachingVariant::ExamplesWithExplanations;
    std::string examples;
    for (std::size_t i = 0; i < mode.examples.size(); ++i) {
      const Question& ex = mode.examples[i];
      if (explain && !ex.explanation) throw MissingExplanation(ex.id);
      if (i > 0) examples += "\n\n";
      examples += "Example " + std::to_string(i + 1) + ":\n" + render_question_for_student(ex);
      examples += "\nAnswer: ";
      examples += to_char(ex.answer);
      examples += ") " + ex.answer_text();
      if (explain) examples += "\nExplanation: " + *ex.explanation;
    }
    examples_block =
        expand_template(templates_.get(explain ? "student_examples_explained" : "student_examples"),
                        {{"examples", examples}}) +
        "\n\n";
  }
  std::string content =
      expand_template(templates_.get("student"), {{"examples_block", examples_block},
                                                  {"question_block", render_question_for_student(q)}});
  return {{Role::User, content}};
}

std::string PromptBuilder::finetune_request(const ChapterRef& chapter, int difficulty) const {
  return expand_template(templates_.get("finetune_request"),
                         {{"grade", std::to_string(curriculum_.grade_of(chapter))},
                          {"subject", chapter.subject},
                          {"chapter", chapter.chapter},
                          {"difficulty", std::to_string(difficulty)}});
}

std::vector<ChatMessage> PromptBuilder::explanation_prompt(const Question& q) const {
  Question bare = q;
  bare.explanation.reset();
  return {{Role::User, expand_template(templates_.get("explanation"),
                                       {{"grade", std::to_string(curriculum_.grade_of(q.chapter))},
                                        {"question_block", render_question_block(bare)}})}};
}

namespace {

bool strip_char(char c) {
  static constexpr std::string_view kStrip = "()[]{}*\"'`.,:;!?_";
  return kStrip.find(c) != std::string_view::npos;
}

std::set<Label> standalone_letters(const std::string& lower) {
  std::set<Label> found;
  std::size_t i = 0;
  while (i < lower.size()) {
    while (i < lower.size() && std::isspace(static_cast<unsigned char>(lower[i]))) ++i;
    std::size_t start = i;
    while (i < lower.size() && !std::isspace(static_cast<unsigned char>(lower[i]))) ++i;
    std::string_view token(lower.data() + start, i - start);
    while (!token.empty() && strip_char(token.front())) token.remove_prefix(1);
    while (!token.empty() && strip_char(token.back())) token.remove_suffix(1);
    if (auto label = label_from_string(token)) found.insert(*label);
  }
  return found;
}

std::set<Label> answer_phrases(const std::string& lower) {
  static const std::regex kPhrase(
      R"((?:answer|option|choice)\s*(?:is\s*)?(?::\s*)?(?:option\s+|choice\s+)?[(\["'*]*([a-d])(?![a-z0-9]))");
  std::set<Label> found;
  for (auto it = std::sregex_iterator(lower.begin(), lower.end(), kPhrase);
       it != std::sregex_iterator(); ++it) {
    found.insert(*label_from_char((*it)[1].str()[0]));
  }
  return found;
}

bool bounded_occurrence(const std::string& haystack, const std::string& needle) {
  if (needle.empty()) return false;
  auto alnum = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; };
  for (std::size_t pos = haystack.find(needle); pos != std::string::npos;
       pos = haystack.find(needle, pos + 1)) {
    std::size_t end = pos + needle.size();
    bool left_ok = pos == 0 || (!alnum(haystack[pos - 1]) && haystack[pos - 1] != '.');
    bool right_ok = end == haystack.size() || !alnum(haystack[end]);
    if (right_ok && end < haystack.size() && haystack[end] == '.' && end + 1 < haystack.size() &&
        std::isdigit(static_cast<unsigned char>(haystack[end + 1]))) {
      right_ok = false;
    }
    if (left_ok && right_ok) return true;
  }
  return false;
}

std::set<Label> option_text_matches(const std::string& lower, const Question& q) {
  std::set<Label> found;
  for (Label label : kLabels) {
    if (bounded_occurrence(lower, to_lower(trim(q.options[index_of(label)])))) {
      found.insert(label);
    }
  }
  return found;
}

}  // namespace

Label parse_student_answer(std::string_view reply, const Question& q) {
  std::string lower = to_lower(reply);
  bool conflicting = false;
  for (auto rule : {&standalone_letters, &answer_phrases}) {
    auto found = rule(lower);
    if (found.size() == 1) return *found.begin();
    conflicting = conflicting || found.size() > 1;
  }
  auto found = option_text_matches(lower, q);
  if (found.size() == 1) return *found.begin();
  conflicting = conflicting || found.size() > 1;
  throw UnparseableAnswer(conflicting ? "conflicting labels" : "no label found");
}

}  // namespace adaptq
