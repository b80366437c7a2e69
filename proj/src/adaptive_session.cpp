#include "adaptq/adaptive_session.hpp"

#include "adaptq/errors.hpp"

#include <algorithm>

namespace adaptq {

AdaptiveSession::AdaptiveSession(SessionState state, PromptBuilder builder,
                                 std::shared_ptr<ChatClient> teacher,
                                 std::filesystem::path log_path, Clock clock)
    : state_(std::move(state)),
      builder_(std::move(builder)),
      teacher_(std::move(teacher)),
      log_(std::make_unique<SessionLog>(std::move(log_path))),
      clock_(clock ? std::move(clock) : system_clock()) {}

AdaptiveSession AdaptiveSession::create(std::string id, std::string curriculum_name,
                                        Curriculum curriculum, SessionConfig config,
                                        std::shared_ptr<ChatClient> teacher,
                                        TemplateSet templates, std::filesystem::path log_path,
                                        Clock clock) {
  if (!log_path.empty() && std::filesystem::exists(log_path)) {
    throw ValidationError("session log already exists: " + log_path.string());
  }
  SessionState state(std::move(id), std::move(curriculum_name), curriculum, config);
  AdaptiveSession session(std::move(state), PromptBuilder(curriculum, std::move(templates)),
                          std::move(teacher), std::move(log_path), std::move(clock));
  session.created_at_ = session.clock_();
  session.log_->write_header(session.state_, curriculum, session.created_at_);
  return session;
}

AdaptiveSession AdaptiveSession::restore(const std::filesystem::path& log_path,
                                         std::shared_ptr<ChatClient> teacher,
                                         TemplateSet templates, Clock clock) {
  ReplayedSession replayed = replay_session_log(log_path);
  if (replayed.truncated_tail) repair_session_log(log_path);
  AdaptiveSession session(std::move(replayed.state),
                          PromptBuilder(std::move(replayed.curriculum), std::move(templates)),
                          std::move(teacher), log_path, std::move(clock));
  session.created_at_ = std::move(replayed.created_at);
  session.issued_ = std::move(replayed.issued);
  session.pending_ = std::move(replayed.pending);
  return session;
}

bool AdaptiveSession::complete() const {
  return std::holds_alternative<SessionComplete>(next_question_request(state_));
}

std::optional<Question> AdaptiveSession::next() {
  if (pending_) return pending_;
  NextStep step = next_question_request(state_);
  if (std::holds_alternative<SessionComplete>(step)) return std::nullopt;
  Question q = generate(std::get<QuestionRequest>(step));
  log_->write_issued(q, clock_());
  issued_.push_back(q);
  pending_ = q;
  return pending_;
}

Question AdaptiveSession::generate(const QuestionRequest& request) {
  std::vector<Question> previous;
  for (auto it = issued_.rbegin(); it != issued_.rend() && previous.size() < kPreviousStemCap;
       ++it) {
    if (it->chapter == request.chapter) previous.push_back(*it);
  }
  std::reverse(previous.begin(), previous.end());

  auto messages = builder_.generation_prompt(request.chapter, request.difficulty, 1, previous);
  std::string reason;
  for (int attempt = 0; attempt <= kGenerationRetries; ++attempt) {
    std::vector<Question> parsed;
    try {
      parsed = parse_question_block(teacher_->complete(messages), request.chapter);
    } catch (const MalformedBlock& e) {
      reason = e.what();
      continue;
    }
    for (auto& q : parsed) {
      bool seen = std::any_of(issued_.begin(), issued_.end(),
                              [&](const Question& prior) { return is_duplicate(prior, q); });
      if (!seen) return q;
    }
    reason = "generated question duplicates an earlier one";
  }
  throw GenerationFailed(request.difficulty, state_.attempts().size(), reason);
}

AnswerOutcome AdaptiveSession::answer(const std::string& question_id, Label chosen) {
  if (!pending_ || pending_->id != question_id) {
    throw StaleQuestion("question " + question_id + " is not the pending question");
  }
  Question q = *pending_;
  state_ = record_answer(state_, q, chosen, clock_());
  log_->write_attempt(q, state_.attempts().back());
  pending_.reset();
  const ChapterState& chapter = state_.chapter(q.chapter);
  return {state_.attempts().back().correct, q.answer, chapter.difficulty, chapter.mastered};
}

}  // namespace adaptq
