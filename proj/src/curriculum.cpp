#include "adaptq/curriculum.hpp"

#include "adaptq/errors.hpp"
#include "adaptq/util.hpp"

#include <algorithm>
#include <set>

#include "json.hpp"

namespace adaptq {

using nlohmann::json;

namespace {

void validate(const std::vector<Subject>& subjects) {
  if (subjects.empty()) throw ValidationError("curriculum has no subjects");
  std::set<std::string> names;
  for (const auto& subject : subjects) {
    if (subject.name.empty()) throw ValidationError("subject with empty name");
    if (!names.insert(subject.name).second) {
      throw ValidationError("duplicate subject '" + subject.name + "'");
    }
    if (subject.grade <= 0) {
      throw ValidationError("subject '" + subject.name + "' has non-positive grade");
    }
    if (subject.chapters.empty()) {
      throw ValidationError("subject '" + subject.name + "' has no chapters");
    }
    std::set<std::string> chapters;
    for (const auto& chapter : subject.chapters) {
      if (chapter.empty()) {
        throw ValidationError("subject '" + subject.name + "' has an empty chapter name");
      }
      if (!chapters.insert(chapter).second) {
        throw ValidationError("duplicate chapter '" + chapter + "' in subject '" +
                              subject.name + "'");
      }
    }
  }
}

// nlohmann reports a byte offset; convert it to a 1-based line number.
std::size_t line_of(const std::string& text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + byte, '\n'));
}

}  // namespace

Curriculum::Curriculum(std::vector<Subject> subjects) : subjects_(std::move(subjects)) {
  validate(subjects_);
}

Curriculum Curriculum::from_json(const json& doc) {
  if (!doc.is_object() || !doc.contains("subjects") || !doc["subjects"].is_array()) {
    throw ValidationError("curriculum must be an object with a 'subjects' array");
  }
  std::vector<Subject> subjects;
  for (const auto& item : doc["subjects"]) {
    if (!item.is_object()) throw ValidationError("subject entry must be an object");
    Subject subject;
    try {
      subject.name = item.at("name").get<std::string>();
      subject.grade = item.at("grade").get<int>();
      subject.chapters = item.at("chapters").get<std::vector<std::string>>();
    } catch (const json::exception& e) {
      throw ValidationError(std::string("bad subject entry: ") + e.what());
    }
    subjects.push_back(std::move(subject));
  }
  return Curriculum(std::move(subjects));
}

json Curriculum::to_json() const {
  json subjects = json::array();
  for (const auto& subject : subjects_) {
    subjects.push_back(
        {{"name", subject.name}, {"grade", subject.grade}, {"chapters", subject.chapters}});
  }
  return {{"subjects", subjects}};
}

const Subject* Curriculum::find_subject(const std::string& name) const {
  auto it = std::find_if(subjects_.begin(), subjects_.end(),
                         [&](const Subject& s) { return s.name == name; });
  return it == subjects_.end() ? nullptr : &*it;
}

bool Curriculum::resolve(const ChapterRef& ref) const {
  const Subject* subject = find_subject(ref.subject);
  if (subject == nullptr) return false;
  return std::find(subject->chapters.begin(), subject->chapters.end(), ref.chapter) !=
         subject->chapters.end();
}

std::vector<ChapterRef> Curriculum::chapters() const {
  std::vector<ChapterRef> out;
  for (const auto& subject : subjects_) {
    for (const auto& chapter : subject.chapters) out.push_back({subject.name, chapter});
  }
  return out;
}

int Curriculum::grade_of(const ChapterRef& ref) const {
  if (!resolve(ref)) throw ValidationError("unknown chapter " + adaptq::to_string(ref));
  return find_subject(ref.subject)->grade;
}

Curriculum load_curriculum(const std::filesystem::path& path) {
  std::string text = read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(line_of(text, e.byte == 0 ? 0 : e.byte - 1), e.what());
  }
  return Curriculum::from_json(doc);
}

std::string serialize_curriculum(const Curriculum& curriculum) {
  return curriculum.to_json().dump(2) + "\n";
}

bool resolve(const Curriculum& curriculum, const ChapterRef& ref) {
  return curriculum.resolve(ref);
}

std::filesystem::path locate_curriculum(const std::string& name_or_path,
                                        const std::filesystem::path& data_dir) {
  std::filesystem::path direct(name_or_path);
  if (std::filesystem::is_regular_file(direct)) return direct;
  auto named = data_dir / "curricula" / (name_or_path + ".json");
  if (std::filesystem::is_regular_file(named)) return named;
  throw NotFound("unknown curriculum '" + name_or_path + "'");
}

json chapter_to_json(const ChapterRef& ref) {
  return {{"subject", ref.subject}, {"chapter", ref.chapter}};
}

ChapterRef chapter_from_json(const json& doc) {
  try {
    return {doc.at("subject").get<std::string>(), doc.at("chapter").get<std::string>()};
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad chapter reference: ") + e.what());
  }
}

std::string to_string(const ChapterRef& ref) { return ref.subject + " / " + ref.chapter; }

}  // namespace adaptq
