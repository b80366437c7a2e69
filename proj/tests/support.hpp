#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "adaptq/curriculum.hpp"
#include "adaptq/prompting.hpp"
#include "adaptq/question.hpp"
#include "adaptq/util.hpp"

namespace testing {

inline std::filesystem::path source_dir() { return ADAPTQ_SOURCE_DIR; }
inline std::filesystem::path fixture(const std::string& name) {
  return source_dir() / "tests" / "fixtures" / name;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    path_ = std::filesystem::temp_directory_path() / ("adaptq-test-" + adaptq::random_hex_id());
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline adaptq::ChapterRef powers() { return {"Numbers", "Powers with decimal and fractional bases"}; }
inline adaptq::ChapterRef word_problems() {
  return {"Algebra", "Solve linear equations: word problems"};
}

inline adaptq::Question figure1_question() {
  adaptq::Question q;
  q.chapter = powers();
  q.stem = "What is the value of 1.5 raised to the power of 2?";
  q.options = {"2.25", "3.0", "2.5", "1.75"};
  q.answer = adaptq::Label::A;
  q.difficulty = 1;
  q.id = adaptq::content_id(q);
  return q;
}

inline adaptq::Question make_question(const adaptq::ChapterRef& chapter, const std::string& stem,
                                      adaptq::Label answer = adaptq::Label::A,
                                      int difficulty = 1) {
  adaptq::Question q;
  q.chapter = chapter;
  q.stem = stem;
  q.options = {stem + " one", stem + " two", stem + " three", stem + " four"};
  q.answer = answer;
  q.difficulty = difficulty;
  q.id = adaptq::content_id(q);
  return q;
}

inline adaptq::Curriculum grade9_math() {
  return adaptq::load_curriculum(source_dir() / "curricula" / "grade9-math.json");
}
inline adaptq::Curriculum grade9_algebra() {
  return adaptq::load_curriculum(source_dir() / "curricula" / "grade9-algebra.json");
}
inline adaptq::TemplateSet templates() {
  return adaptq::TemplateSet::load(source_dir() / "templates");
}

// Random single-line text of printable words joined by single spaces.
inline std::string random_text(std::mt19937_64& rng, int max_words = 8) {
  static const std::string alphabet =
      "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789"
      ".,;:?!$%+-=/*()'\"<>[]{}#&@^_~";
  std::uniform_int_distribution<int> words(1, max_words);
  std::uniform_int_distribution<int> length(1, 9);
  std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
  std::string out;
  int n = words(rng);
  for (int w = 0; w < n; ++w) {
    if (w > 0) out += ' ';
    int len = length(rng);
    for (int i = 0; i < len; ++i) out += alphabet[pick(rng)];
  }
  return out;
}

// Any question satisfying validate_question.
inline adaptq::Question random_question(std::mt19937_64& rng) {
  adaptq::Question q;
  q.chapter = word_problems();
  q.stem = random_text(rng, 14);
  for (auto& option : q.options) option = random_text(rng, 4);
  q.answer = adaptq::kLabels[std::uniform_int_distribution<std::size_t>(0, 3)(rng)];
  q.difficulty = std::uniform_int_distribution<int>(1, 5)(rng);
  if (std::bernoulli_distribution(0.5)(rng)) q.explanation = random_text(rng, 12);
  q.id = adaptq::content_id(q);
  return q;
}

}  // namespace testing
