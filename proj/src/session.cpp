#include "adaptq/session.hpp"

#include "adaptq/errors.hpp"
#include "adaptq/percent.hpp"

#include <algorithm>
#include <iomanip>
#include <random>
#include <sstream>

namespace adaptq {

using nlohmann::json;

void SessionConfig::validate() const {
  auto in_range = [](int v) { return v >= kMinDifficulty && v <= kMaxDifficulty; };
  if (!in_range(initial_difficulty)) {
    throw ValidationError("initial difficulty must be in 1..5");
  }
  if (!in_range(pass_threshold)) {
    throw ValidationError("pass threshold must be in 1..5 (at most the maximum difficulty)");
  }
  if (required_streak < 1) throw ValidationError("required streak must be positive");
  if (!(downweight >= 0.0 && downweight <= 1.0)) {
    throw ValidationError("downweight must be in [0, 1]");
  }
}

json SessionConfig::to_json() const {
  return {{"initial_difficulty", initial_difficulty},
          {"pass_threshold", pass_threshold},
          {"required_streak", required_streak},
          {"policy", policy == MasteryPolicy::Remove ? "remove" : "downweight"},
          {"downweight", downweight},
          {"seed", seed}};
}

SessionConfig SessionConfig::from_json(const json& doc) { return from_json(doc, SessionConfig{}); }

SessionConfig SessionConfig::from_json(const json& doc, SessionConfig base) {
  SessionConfig cfg = base;
  if (!doc.is_null() && !doc.is_object()) throw ValidationError("session config must be an object");
  try {
    if (doc.is_object()) {
      cfg.initial_difficulty = doc.value("initial_difficulty", cfg.initial_difficulty);
      cfg.pass_threshold = doc.value("pass_threshold", cfg.pass_threshold);
      cfg.required_streak = doc.value("required_streak", cfg.required_streak);
      cfg.downweight = doc.value("downweight", cfg.downweight);
      cfg.seed = doc.value("seed", cfg.seed);
      if (doc.contains("policy")) {
        auto policy = doc["policy"].get<std::string>();
        if (policy == "remove") {
          cfg.policy = MasteryPolicy::Remove;
        } else if (policy == "downweight") {
          cfg.policy = MasteryPolicy::Downweight;
        } else {
          throw ValidationError("unknown mastery policy '" + policy + "'");
        }
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad session config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

SessionState::SessionState(std::string id, std::string curriculum_name,
                           const Curriculum& curriculum, SessionConfig config)
    : id_(std::move(id)), curriculum_name_(std::move(curriculum_name)), config_(config) {
  config_.validate();
  for (auto& ref : curriculum.chapters()) {
    chapters_.push_back({std::move(ref), config_.initial_difficulty, 0, false});
  }
}

const ChapterState& SessionState::chapter(const ChapterRef& ref) const {
  auto it = std::find_if(chapters_.begin(), chapters_.end(),
                         [&](const ChapterState& c) { return c.chapter == ref; });
  if (it == chapters_.end()) throw ValidationError("chapter not in session: " + to_string(ref));
  return *it;
}

ChapterState& SessionState::chapter_mut(const ChapterRef& ref) {
  return const_cast<ChapterState&>(std::as_const(*this).chapter(ref));
}

NextStep next_question_request(const SessionState& s) {
  const auto& chapters = s.chapters();
  bool all_mastered = std::all_of(chapters.begin(), chapters.end(),
                                  [](const ChapterState& c) { return c.mastered; });
  if (all_mastered) return SessionComplete{};

  const SessionConfig& cfg = s.config();
  if (cfg.policy == MasteryPolicy::Downweight) {
    std::vector<double> weights;
    double total = 0.0;
    for (const auto& c : chapters) {
      weights.push_back(c.mastered ? cfg.downweight : 1.0);
      total += weights.back();
    }
    std::mt19937_64 engine(cfg.seed ^ (0x9e3779b97f4a7c15ULL * (s.attempts().size() + 1)));
    double point = static_cast<double>(engine() >> 11) * 0x1.0p-53 * total;
    for (std::size_t i = 0; i < chapters.size(); ++i) {
      if (point < weights[i] && weights[i] > 0.0) {
        return QuestionRequest{chapters[i].chapter, chapters[i].difficulty};
      }
      point -= weights[i];
    }
    // Rounding at the top of the range: fall back to the last positive weight.
    for (std::size_t i = chapters.size(); i-- > 0;) {
      if (weights[i] > 0.0) return QuestionRequest{chapters[i].chapter, chapters[i].difficulty};
    }
  }

  std::size_t start = 0;
  if (!s.attempts().empty()) {
    const ChapterRef& last = s.attempts().back().chapter;
    auto it = std::find_if(chapters.begin(), chapters.end(),
                           [&](const ChapterState& c) { return c.chapter == last; });
    start = static_cast<std::size_t>(it - chapters.begin()) + 1;
  }
  for (std::size_t k = 0; k < chapters.size(); ++k) {
    const auto& c = chapters[(start + k) % chapters.size()];
    if (!c.mastered) return QuestionRequest{c.chapter, c.difficulty};
  }
  return SessionComplete{};
}

SessionState record_answer(SessionState s, const Question& q, Label chosen,
                           std::string timestamp) {
  ChapterState& chapter = s.chapter_mut(q.chapter);
  const SessionConfig& cfg = s.config_;
  if (chapter.mastered && cfg.policy == MasteryPolicy::Remove) {
    throw MasteredChapter("chapter already mastered: " + to_string(q.chapter));
  }
  Attempt attempt;
  attempt.question_id = q.id;
  attempt.chapter = q.chapter;
  attempt.difficulty = chapter.difficulty;
  attempt.rated_difficulty = q.difficulty;
  attempt.chosen = chosen;
  attempt.correct = chosen == q.answer;
  attempt.timestamp = std::move(timestamp);

  if (attempt.correct) {
    chapter.difficulty = std::min(chapter.difficulty + 1, kMaxDifficulty);
    chapter.streak = attempt.difficulty >= cfg.pass_threshold ? chapter.streak + 1 : 0;
  } else {
    chapter.streak = 0;
  }
  if (chapter.streak >= cfg.required_streak) chapter.mastered = true;
  s.attempts_.push_back(std::move(attempt));
  return s;
}

bool check_mastery(std::span<const Attempt> history, const ChapterRef& chapter,
                   const SessionConfig& config) {
  std::size_t needed = static_cast<std::size_t>(config.required_streak);
  std::size_t seen = 0;
  for (auto it = history.rbegin(); it != history.rend() && seen < needed; ++it) {
    if (it->chapter != chapter) continue;
    if (!it->correct || it->difficulty < config.pass_threshold) return false;
    ++seen;
  }
  return seen == needed;
}

bool check_mastery(const SessionState& s, const ChapterRef& chapter) {
  return check_mastery(s.attempts(), chapter, s.config());
}

std::string SessionReport::accuracy(std::size_t correct, std::size_t attempts) {
  if (attempts == 0) return "n/a";
  return format_percent(static_cast<std::int64_t>(correct), static_cast<std::int64_t>(attempts),
                        2, Rounding::HalfUp) +
         "%";
}

SessionReport session_report(const SessionState& s) {
  SessionReport report;
  report.session_id = s.id();
  for (const auto& c : s.chapters()) {
    ChapterReport row;
    row.chapter = c.chapter;
    row.difficulty = c.difficulty;
    row.mastered = c.mastered;
    for (const auto& a : s.attempts()) {
      if (a.chapter != c.chapter) continue;
      ++row.attempts;
      if (a.correct) ++row.correct;
    }
    report.attempts += row.attempts;
    report.correct += row.correct;
    report.chapters.push_back(row);
  }
  return report;
}

json SessionReport::to_json() const {
  json rows = json::array();
  for (const auto& c : chapters) {
    rows.push_back({{"subject", c.chapter.subject},
                    {"chapter", c.chapter.chapter},
                    {"attempts", c.attempts},
                    {"correct", c.correct},
                    {"accuracy", accuracy(c.correct, c.attempts)},
                    {"difficulty", c.difficulty},
                    {"mastered", c.mastered}});
  }
  return {{"session_id", session_id},
          {"chapters", rows},
          {"attempts", attempts},
          {"correct", correct},
          {"accuracy", accuracy(correct, attempts)}};
}

std::string SessionReport::render_text() const {
  std::ostringstream out;
  out << "Session " << session_id << "\n";
  out << std::left << std::setw(22) << "Subject" << std::setw(54) << "Chapter" << std::right
      << std::setw(9) << "Attempts" << std::setw(9) << "Correct" << std::setw(10) << "Accuracy"
      << std::setw(12) << "Difficulty" << std::setw(10) << "Mastered" << "\n";
  for (const auto& c : chapters) {
    out << std::left << std::setw(22) << c.chapter.subject << std::setw(54) << c.chapter.chapter
        << std::right << std::setw(9) << c.attempts << std::setw(9) << c.correct << std::setw(10)
        << accuracy(c.correct, c.attempts) << std::setw(12) << c.difficulty << std::setw(10)
        << (c.mastered ? "yes" : "no") << "\n";
  }
  out << "Overall: " << correct << "/" << attempts << " correct (" << accuracy(correct, attempts)
      << ")\n";
  return out.str();
}

json attempt_to_json(const Attempt& a) {
  return {{"question_id", a.question_id},
          {"chapter", chapter_to_json(a.chapter)},
          {"difficulty", a.difficulty},
          {"rated_difficulty", a.rated_difficulty},
          {"chosen", std::string(1, to_char(a.chosen))},
          {"correct", a.correct},
          {"ts", a.timestamp}};
}

}  // namespace adaptq
