#pragma once

#include <compare>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace adaptq {

struct ChapterRef {
  std::string subject;
  std::string chapter;

  auto operator<=>(const ChapterRef&) const = default;
};

struct Subject {
  std::string name;
  int grade = 0;
  std::vector<std::string> chapters;

  bool operator==(const Subject&) const = default;
};

// Subject/chapter hierarchy that scopes generation and mastery tracking.
// Immutable once constructed; every instance has passed validate().
class Curriculum {
 public:
  // Throws ValidationError on an empty subject list, duplicate subject
  // names, empty or duplicate chapter lists, or non-positive grades.
  explicit Curriculum(std::vector<Subject> subjects);

  static Curriculum from_json(const nlohmann::json& doc);
  nlohmann::json to_json() const;

  const std::vector<Subject>& subjects() const noexcept { return subjects_; }

  bool resolve(const ChapterRef& ref) const;
  const Subject* find_subject(const std::string& name) const;

  // Every (subject, chapter) pair in file order.
  std::vector<ChapterRef> chapters() const;

  // Grade of the subject owning `ref`. Throws ValidationError if unresolved.
  int grade_of(const ChapterRef& ref) const;

  bool operator==(const Curriculum&) const = default;

 private:
  std::vector<Subject> subjects_;
};

Curriculum load_curriculum(const std::filesystem::path& path);
std::string serialize_curriculum(const Curriculum& curriculum);

bool resolve(const Curriculum& curriculum, const ChapterRef& ref);

// Looks up `name_or_path` first as an existing file, then as
// `<data_dir>/curricula/<name>.json`.
std::filesystem::path locate_curriculum(const std::string& name_or_path,
                                        const std::filesystem::path& data_dir);

nlohmann::json chapter_to_json(const ChapterRef& ref);
ChapterRef chapter_from_json(const nlohmann::json& doc);
std::string to_string(const ChapterRef& ref);

}  // namespace adaptq
