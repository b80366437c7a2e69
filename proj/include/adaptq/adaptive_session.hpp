#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "adaptq/event_log.hpp"
#include "adaptq/prompting.hpp"
#include "adaptq/provider.hpp"
#include "adaptq/session.hpp"
#include "adaptq/util.hpp"

namespace adaptq {

// Most recent stems per chapter embedded in a session generation prompt.
inline constexpr std::size_t kPreviousStemCap = 20;
// Re-requests after a malformed or duplicate generation before giving up.
inline constexpr int kGenerationRetries = 3;

struct AnswerOutcome {
  bool correct = false;
  Label correct_label = Label::A;
  int new_difficulty = 1;
  bool mastered = false;
};

// One live adaptive session: the state machine plus question generation,
// answer grading and event-log persistence. Not thread-safe; callers
// serialize access per session.
class AdaptiveSession {
 public:
  static AdaptiveSession create(std::string id, std::string curriculum_name, Curriculum curriculum,
                                SessionConfig config, std::shared_ptr<ChatClient> teacher,
                                TemplateSet templates, std::filesystem::path log_path,
                                Clock clock);

  // Rebuilds the session from its event log, including any question that
  // was issued but not yet answered.
  static AdaptiveSession restore(const std::filesystem::path& log_path,
                                 std::shared_ptr<ChatClient> teacher, TemplateSet templates,
                                 Clock clock);

  // The pending question, generating one if none is pending. Returns nullopt
  // once the session is complete. Repeated calls without an answer return
  // the same question. Throws GenerationFailed.
  std::optional<Question> next();

  // Throws StaleQuestion when `question_id` is not the pending question.
  AnswerOutcome answer(const std::string& question_id, Label chosen);

  bool complete() const;
  const SessionState& state() const noexcept { return state_; }
  const Curriculum& curriculum() const noexcept { return builder_.curriculum(); }
  const std::optional<Question>& pending() const noexcept { return pending_; }
  const std::vector<Question>& issued() const noexcept { return issued_; }
  const std::string& created_at() const noexcept { return created_at_; }
  SessionReport report() const { return session_report(state_); }

 private:
  AdaptiveSession(SessionState state, PromptBuilder builder, std::shared_ptr<ChatClient> teacher,
                  std::filesystem::path log_path, Clock clock);

  Question generate(const QuestionRequest& request);

  SessionState state_;
  PromptBuilder builder_;
  std::shared_ptr<ChatClient> teacher_;
  std::unique_ptr<SessionLog> log_;
  Clock clock_;
  std::string created_at_;
  std::vector<Question> issued_;
  std::optional<Question> pending_;
};

}  // namespace adaptq
