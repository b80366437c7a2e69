#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "adaptq/curriculum.hpp"
#include "adaptq/question.hpp"
#include "adaptq/session.hpp"
#include "json.hpp"

namespace adaptq {

// Append-only JSON-lines record of one session:
//
//   {"type":"session_created", "session_id", "curriculum", "curriculum_doc",
//    "config", "created_at"}
//   {"type":"question_issued", "question", "ts"}
//   {"type":"attempt", "question", "chosen", "correct", "difficulty", "ts"}
//
// Session state is never stored directly; it is rebuilt by folding
// record_answer over the attempt records.
class SessionLog {
 public:
  SessionLog() = default;
  // Opens `path` for appending; an empty path disables persistence.
  explicit SessionLog(std::filesystem::path path);

  void write_header(const SessionState& s, const Curriculum& curriculum,
                    const std::string& created_at);
  void write_issued(const Question& q, const std::string& ts);
  void write_attempt(const Question& q, const Attempt& attempt);

  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  void append(const nlohmann::json& record);

  std::filesystem::path path_;
  std::ofstream out_;
};

struct ReplayedSession {
  SessionState state;
  Curriculum curriculum;
  std::string created_at;
  std::vector<Question> issued;
  // Issued question with no attempt after it.
  std::optional<Question> pending;
  // The last line was an incomplete write and was skipped.
  bool truncated_tail = false;
};

// Rebuilds a session from its log. A truncated final line (a write cut off
// by a crash) is ignored; any other malformed line throws ParseError.
ReplayedSession replay_session_log(const std::filesystem::path& path);

// Drops an incomplete final line so later appends start on a fresh line.
void repair_session_log(const std::filesystem::path& path);

}  // namespace adaptq
