#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "adaptq/curriculum.hpp"
#include "adaptq/question.hpp"
#include "json.hpp"

namespace adaptq {

enum class Role { System, User, Assistant };

std::string_view to_string(Role role);
Role role_from_string(std::string_view s);

struct ChatMessage {
  Role role = Role::User;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

nlohmann::json messages_to_json(const std::vector<ChatMessage>& messages);
std::vector<ChatMessage> messages_from_json(const nlohmann::json& doc);

enum class TeachingVariant { ZeroShot, Examples, ExamplesWithExplanations };

std::string_view to_string(TeachingVariant variant);

// Examples are empty for ZeroShot and exactly three otherwise.
struct TeachingMode {
  TeachingVariant variant = TeachingVariant::ZeroShot;
  std::vector<Question> examples;

  static TeachingMode zero_shot() { return {}; }
  static TeachingMode with_examples(std::vector<Question> examples);
  static TeachingMode with_explanations(std::vector<Question> examples);
};

inline constexpr std::size_t kTeachingExampleCount = 3;

// Prompt wording lives in text files under <data_dir>/templates. Placeholders
// are written as {name}; expansion fails on unknown or unfilled names.
class TemplateSet {
 public:
  static TemplateSet load(const std::filesystem::path& dir);
  static TemplateSet load_default();

  const std::string& get(const std::string& name) const;

 private:
  std::map<std::string, std::string> templates_;
};

// Replaces each {name} with values.at(name). A line consisting only of a
// placeholder that expands to the empty string is dropped entirely.
std::string expand_template(std::string_view text,
                            const std::map<std::string, std::string>& values);

// English word for 1..10, decimal digits otherwise.
std::string count_word(int count);

class PromptBuilder {
 public:
  PromptBuilder(Curriculum curriculum, TemplateSet templates);

  // One user message. `previous` is embedded verbatim (deduplicated by stem)
  // as the anti-duplication clause; callers cap its length.
  std::vector<ChatMessage> generation_prompt(const ChapterRef& chapter, int difficulty, int count,
                                             const std::vector<Question>& previous) const;

  // Fresh message sequence for one student attempt. The target is rendered
  // without its answer line.
  std::vector<ChatMessage> student_prompt(const Question& q, const TeachingMode& mode) const;

  // Request half of a fine-tune record.
  std::string finetune_request(const ChapterRef& chapter, int difficulty) const;

  std::vector<ChatMessage> explanation_prompt(const Question& q) const;

  const Curriculum& curriculum() const noexcept { return curriculum_; }

 private:
  Curriculum curriculum_;
  TemplateSet templates_;
};

// Question stem and labelled options only.
std::string render_question_for_student(const Question& q);

// Extraction order: standalone option letters, "answer is X" phrasing, then
// a unique option-text match. The first rule that yields exactly one label
// wins. Throws UnparseableAnswer when no rule does.
Label parse_student_answer(std::string_view reply, const Question& q);

}  // namespace adaptq
