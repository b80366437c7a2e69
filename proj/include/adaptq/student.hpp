#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "adaptq/prompting.hpp"
#include "adaptq/provider.hpp"
#include "adaptq/question.hpp"

namespace adaptq {

// One graded answer from the student model. A reply the extractor cannot
// read scores as wrong and is flagged through parse_error.
struct StudentRun {
  std::string question_id;
  TeachingVariant variant = TeachingVariant::ZeroShot;
  std::string raw_reply;
  std::optional<Label> label;
  std::string parse_error;
  bool correct = false;

  bool parse_failed() const { return !label.has_value(); }
};

// Sends a fresh prompt (no carried history) and grades the reply.
// Provider errors propagate; parse failures are recorded, not thrown.
StudentRun answer_question(ChatClient& client, const PromptBuilder& prompts, const Question& q,
                           const TeachingMode& mode);

struct StudentJob {
  Question question;
  TeachingMode mode;
};

// Runs every job with at most `max_in_flight` concurrent requests. Results
// come back in job order. `on_done` fires once per finished job from the
// worker thread. The first failure (in job order) is rethrown after all
// workers stop.
std::vector<StudentRun> answer_all(ChatClient& client, const PromptBuilder& prompts,
                                   const std::vector<StudentJob>& jobs, std::size_t max_in_flight,
                                   const std::function<void()>& on_done = {});

}  // namespace adaptq
