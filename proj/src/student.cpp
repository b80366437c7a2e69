#include "adaptq/student.hpp"

#include "adaptq/errors.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <thread>

namespace adaptq {

StudentRun answer_question(ChatClient& client, const PromptBuilder& prompts, const Question& q,
                           const TeachingMode& mode) {
  StudentRun run;
  run.question_id = q.id;
  run.variant = mode.variant;
  run.raw_reply = client.complete(prompts.student_prompt(q, mode));
  try {
    run.label = parse_student_answer(run.raw_reply, q);
    run.correct = *run.label == q.answer;
  } catch (const UnparseableAnswer& e) {
    run.parse_error = e.reason();
    run.correct = false;
  }
  return run;
}

std::vector<StudentRun> answer_all(ChatClient& client, const PromptBuilder& prompts,
                                   const std::vector<StudentJob>& jobs, std::size_t max_in_flight,
                                   const std::function<void()>& on_done) {
  std::vector<StudentRun> results(jobs.size());
  std::vector<std::exception_ptr> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};

  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      if (failed) return;
      try {
        results[i] = answer_question(client, prompts, jobs[i].question, jobs[i].mode);
        if (on_done) on_done();
      } catch (...) {
        errors[i] = std::current_exception();
        failed = true;
      }
    }
  };

  std::size_t threads = std::clamp<std::size_t>(max_in_flight, 1, std::max<std::size_t>(jobs.size(), 1));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& error : errors) {
    if (error) std::rethrow_exception(error);
  }
  return results;
}

}  // namespace adaptq
