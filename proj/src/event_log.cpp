#include "adaptq/event_log.hpp"

#include "adaptq/errors.hpp"
#include "adaptq/util.hpp"

namespace adaptq {

using nlohmann::json;

SessionLog::SessionLog(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.empty()) return;
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  out_.open(path_, std::ios::app | std::ios::binary);
  if (!out_) throw IoError("cannot open session log " + path_.string());
}

void SessionLog::append(const json& record) {
  if (!out_.is_open()) return;
  out_ << record.dump() << '\n';
  out_.flush();
  if (!out_) throw IoError("session log write failed for " + path_.string());
}

void SessionLog::write_header(const SessionState& s, const Curriculum& curriculum,
                              const std::string& created_at) {
  append({{"type", "session_created"},
          {"session_id", s.id()},
          {"curriculum", s.curriculum_name()},
          {"curriculum_doc", curriculum.to_json()},
          {"config", s.config().to_json()},
          {"created_at", created_at}});
}

void SessionLog::write_issued(const Question& q, const std::string& ts) {
  append({{"type", "question_issued"}, {"question", question_to_json(q)}, {"ts", ts}});
}

void SessionLog::write_attempt(const Question& q, const Attempt& attempt) {
  append({{"type", "attempt"},
          {"question", question_to_json(q)},
          {"chosen", std::string(1, to_char(attempt.chosen))},
          {"correct", attempt.correct},
          {"difficulty", attempt.difficulty},
          {"ts", attempt.timestamp}});
}

ReplayedSession replay_session_log(const std::filesystem::path& path) {
  std::vector<std::string> lines = split_lines(read_file(path));
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();

  std::optional<ReplayedSession> session;
  bool truncated = false;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    json record;
    try {
      record = json::parse(lines[i]);
    } catch (const json::parse_error& e) {
      if (i + 1 == lines.size()) {
        truncated = true;
        break;
      }
      throw ParseError(i + 1, e.what());
    }
    try {
      std::string type = record.at("type").get<std::string>();
      if (type == "session_created") {
        if (session) throw ParseError(i + 1, "duplicate session header");
        Curriculum curriculum = Curriculum::from_json(record.at("curriculum_doc"));
        SessionState state(record.at("session_id").get<std::string>(),
                           record.at("curriculum").get<std::string>(), curriculum,
                           SessionConfig::from_json(record.at("config")));
        session.emplace(ReplayedSession{std::move(state), std::move(curriculum),
                                        record.value("created_at", std::string()),
                                        {},
                                        std::nullopt});
        continue;
      }
      if (!session) throw ParseError(i + 1, "record before session header");
      Question q = question_from_json(record.at("question"));
      if (type == "question_issued") {
        session->issued.push_back(q);
        session->pending = q;
      } else if (type == "attempt") {
        auto chosen = label_from_string(record.at("chosen").get<std::string>());
        if (!chosen) throw ParseError(i + 1, "bad chosen label");
        SessionState next = record_answer(session->state, q, *chosen,
                                          record.value("ts", std::string()));
        const Attempt& applied = next.attempts().back();
        if (applied.correct != record.at("correct").get<bool>() ||
            applied.difficulty != record.at("difficulty").get<int>()) {
          throw ParseError(i + 1, "attempt record disagrees with replayed state");
        }
        session->state = std::move(next);
        if (session->pending && session->pending->id == q.id) session->pending.reset();
      } else {
        throw ParseError(i + 1, "unknown record type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw ParseError(i + 1, e.what());
    } catch (const ValidationError& e) {
      throw ParseError(i + 1, e.what());
    }
  }
  if (!session) throw ParseError(1, "session log has no header");
  session->truncated_tail = truncated;
  return std::move(*session);
}

void repair_session_log(const std::filesystem::path& path) {
  std::string text = read_file(path);
  if (text.empty() || text.back() == '\n') return;
  auto cut = text.rfind('\n');
  std::string head = cut == std::string::npos ? std::string() : text.substr(0, cut + 1);
  std::string tail = cut == std::string::npos ? text : text.substr(cut + 1);
  // A complete record that only lost its newline is kept.
  if (json::accept(tail)) {
    write_file(path, text + "\n");
  } else {
    write_file(path, head);
  }
}

}  // namespace adaptq
