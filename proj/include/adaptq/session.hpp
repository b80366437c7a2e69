#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "adaptq/curriculum.hpp"
#include "adaptq/question.hpp"
#include "json.hpp"

namespace adaptq {

enum class MasteryPolicy { Remove, Downweight };

struct SessionConfig {
  int initial_difficulty = 1;
  // Pass threshold: mastery needs correct answers asked at or above it.
  int pass_threshold = 3;
  // Consecutive qualifying correct answers required for mastery.
  int required_streak = 3;
  MasteryPolicy policy = MasteryPolicy::Remove;
  // Selection weight of a mastered chapter under Downweight.
  double downweight = 0.25;
  // Drives the weighted draw under Downweight.
  std::uint64_t seed = 0;

  // Throws ValidationError.
  void validate() const;

  nlohmann::json to_json() const;
  // Missing keys keep the values in `base`; the result is validated.
  static SessionConfig from_json(const nlohmann::json& doc, SessionConfig base);
  static SessionConfig from_json(const nlohmann::json& doc);

  bool operator==(const SessionConfig&) const = default;
};

struct ChapterState {
  ChapterRef chapter;
  int difficulty = 1;
  // Length of the chapter's trailing run of correct answers asked at or
  // above the pass threshold.
  int streak = 0;
  bool mastered = false;

  bool operator==(const ChapterState&) const = default;
};

struct Attempt {
  std::string question_id;
  ChapterRef chapter;
  // Difficulty the state machine requested; drives mastery.
  int difficulty = 1;
  // The generator's own rating of the question, kept for analysis.
  int rated_difficulty = 1;
  Label chosen = Label::A;
  bool correct = false;
  std::string timestamp;

  bool operator==(const Attempt&) const = default;
};

class SessionState {
 public:
  SessionState(std::string id, std::string curriculum_name, const Curriculum& curriculum,
               SessionConfig config);

  const std::string& id() const noexcept { return id_; }
  const std::string& curriculum_name() const noexcept { return curriculum_name_; }
  const SessionConfig& config() const noexcept { return config_; }
  const std::vector<ChapterState>& chapters() const noexcept { return chapters_; }
  const std::vector<Attempt>& attempts() const noexcept { return attempts_; }

  // Throws ValidationError for a chapter outside the curriculum.
  const ChapterState& chapter(const ChapterRef& ref) const;

  bool operator==(const SessionState&) const = default;

  friend SessionState record_answer(SessionState s, const Question& q, Label chosen,
                                    std::string timestamp);

 private:
  ChapterState& chapter_mut(const ChapterRef& ref);

  std::string id_;
  std::string curriculum_name_;
  SessionConfig config_;
  std::vector<ChapterState> chapters_;
  std::vector<Attempt> attempts_;
};

struct QuestionRequest {
  ChapterRef chapter;
  int difficulty = 1;

  bool operator==(const QuestionRequest&) const = default;
};

struct SessionComplete {
  bool operator==(const SessionComplete&) const = default;
};

using NextStep = std::variant<QuestionRequest, SessionComplete>;

// Remove: round-robin over unmastered chapters in curriculum order, resuming
// after the chapter of the latest attempt. Downweight: a draw weighted 1 for
// unmastered and `downweight` for mastered chapters, seeded by the config
// seed and the attempt count. Both complete once every chapter is mastered.
// Pure: equal states give equal answers.
NextStep next_question_request(const SessionState& s);

// Grades `chosen` against q.answer. Correct answers raise the chapter's
// difficulty by one (capped at 5); wrong answers hold it. Throws
// MasteredChapter under Remove when q's chapter is already mastered.
SessionState record_answer(SessionState s, const Question& q, Label chosen,
                           std::string timestamp = {});

// True iff the last `required_streak` attempts in `chapter` are all correct
// and were each asked at difficulty >= pass_threshold.
bool check_mastery(std::span<const Attempt> history, const ChapterRef& chapter,
                   const SessionConfig& config);
bool check_mastery(const SessionState& s, const ChapterRef& chapter);

struct ChapterReport {
  ChapterRef chapter;
  std::size_t attempts = 0;
  std::size_t correct = 0;
  int difficulty = 1;
  bool mastered = false;
};

struct SessionReport {
  std::string session_id;
  std::vector<ChapterReport> chapters;
  std::size_t attempts = 0;
  std::size_t correct = 0;

  // "90.00%", or "n/a" without attempts.
  static std::string accuracy(std::size_t correct, std::size_t attempts);

  nlohmann::json to_json() const;
  std::string render_text() const;
};

SessionReport session_report(const SessionState& s);

nlohmann::json attempt_to_json(const Attempt& a);

}  // namespace adaptq
