#include "adaptq/experiment.hpp"

#include "adaptq/errors.hpp"
#include "adaptq/percent.hpp"
#include "adaptq/student.hpp"

#include <algorithm>
#include <atomic>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace adaptq {

using nlohmann::json;

std::string_view to_string(Condition condition) {
  switch (condition) {
    case Condition::Baseline:
      return "Baseline";
    case Condition::TeachNoExplanation:
      return "TeachNoExplanation";
    case Condition::TeachWithExplanation:
      return "TeachWithExplanation";
  }
  return "Baseline";
}

Condition condition_from_string(std::string_view s) {
  if (s == "Baseline") return Condition::Baseline;
  if (s == "TeachNoExplanation") return Condition::TeachNoExplanation;
  if (s == "TeachWithExplanation") return Condition::TeachWithExplanation;
  throw ValidationError("unknown condition '" + std::string(s) + "'");
}

std::string_view condition_heading(Condition condition) {
  switch (condition) {
    case Condition::Baseline:
      return "Before Teaching (%)";
    case Condition::TeachNoExplanation:
      return "Teaching without Explanation (%)";
    case Condition::TeachWithExplanation:
      return "Teaching with Explanation (%)";
  }
  return "";
}

void ExperimentConfig::validate() const {
  if (per_level <= 0) throw ValidationError("per-level question count must be positive");
  if (test_size < 0 || teach_size < 0 || test_size + teach_size != per_level) {
    throw ValidationError("test and teach sizes must sum to the per-level count");
  }
  if (levels.empty()) throw ValidationError("no difficulty levels configured");
  std::set<int> seen_levels;
  for (int level : levels) {
    if (level < kMinDifficulty || level > kMaxDifficulty) throw InvalidDifficulty(level);
    if (!seen_levels.insert(level).second) throw ValidationError("duplicate level");
  }
  if (conditions.empty()) throw ValidationError("no conditions configured");
  std::set<Condition> seen_conditions(conditions.begin(), conditions.end());
  if (seen_conditions.size() != conditions.size()) {
    throw ValidationError("duplicate condition");
  }
  bool teaching = seen_conditions.count(Condition::TeachNoExplanation) > 0 ||
                  seen_conditions.count(Condition::TeachWithExplanation) > 0;
  if (teaching && teach_size != static_cast<int>(kTeachingExampleCount)) {
    throw ValidationError("teaching conditions need a teach set of exactly 3");
  }
  if (example_level && !seen_levels.count(*example_level)) {
    throw ValidationError("example level is not one of the configured levels");
  }
  if (trials < 1) throw ValidationError("trials must be positive");
  if (max_in_flight < 1) throw ValidationError("max_in_flight must be positive");
  teacher.validate();
  student.validate();
}

ExperimentConfig ExperimentConfig::from_json(const json& doc,
                                             const std::filesystem::path& base_dir) {
  if (!doc.is_object()) throw ValidationError("experiment config must be an object");
  ExperimentConfig cfg;
  try {
    cfg.curriculum = doc.value("curriculum", cfg.curriculum);
    if (doc.contains("topic")) cfg.topic = chapter_from_json(doc["topic"]);
    if (doc.contains("levels")) cfg.levels = doc["levels"].get<std::vector<int>>();
    cfg.per_level = doc.value("per_level", cfg.per_level);
    cfg.test_size = doc.value("test_size", cfg.test_size);
    cfg.teach_size = doc.value("teach_size", cfg.teach_size);
    if (doc.contains("conditions")) {
      cfg.conditions.clear();
      for (const auto& c : doc["conditions"]) {
        cfg.conditions.push_back(condition_from_string(c.get<std::string>()));
      }
    }
    cfg.trials = doc.value("trials", cfg.trials);
    cfg.seed = doc.value("seed", cfg.seed);
    if (doc.contains("example_level") && !doc["example_level"].is_null()) {
      cfg.example_level = doc["example_level"].get<int>();
    }
    cfg.max_in_flight = doc.value("max_in_flight", cfg.max_in_flight);
    cfg.generate_explanations = doc.value("generate_explanations", cfg.generate_explanations);
    if (!doc.contains("teacher") || !doc.contains("student")) {
      throw ValidationError("experiment config needs 'teacher' and 'student' providers");
    }
    cfg.teacher =
        ProviderConfig::from_json(doc["teacher"], base_dir, ProviderConfig::teacher_defaults());
    cfg.student =
        ProviderConfig::from_json(doc["student"], base_dir, ProviderConfig::student_defaults());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad experiment config: ") + e.what());
  }
  cfg.source = doc;
  cfg.validate();
  return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::string text = read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(0, path.string() + ": " + e.what());
  }
  return from_json(doc, path.parent_path());
}

std::string ExperimentConfig::hash() const { return hex64(fnv1a64(source.dump())); }

std::size_t QuestionBank::size() const {
  std::size_t n = 0;
  for (const auto& [level, questions] : levels) n += questions.size();
  return n;
}

std::vector<Question> QuestionBank::all() const {
  std::vector<Question> out;
  for (const auto& [level, questions] : levels) {
    out.insert(out.end(), questions.begin(), questions.end());
  }
  return out;
}

void QuestionBank::validate() const {
  std::set<std::string> stems;
  for (const auto& [level, questions] : levels) {
    for (const auto& q : questions) {
      validate_question(q);
      if (q.difficulty != level) {
        throw ValidationError("question " + q.id + " rated " + std::to_string(q.difficulty) +
                              " in level " + std::to_string(level));
      }
      if (q.chapter != topic) throw ValidationError("question " + q.id + " is off topic");
      if (!stems.insert(normalize_stem(q.stem)).second) {
        throw ValidationError("duplicate stem in bank: " + q.stem);
      }
    }
  }
}

json QuestionBank::to_json() const {
  json lv = json::object();
  for (const auto& [level, questions] : levels) {
    json arr = json::array();
    for (const auto& q : questions) arr.push_back(question_to_json(q));
    lv[std::to_string(level)] = arr;
  }
  return {{"topic", chapter_to_json(topic)}, {"levels", lv}, {"transcript_refs", transcript_refs}};
}

QuestionBank QuestionBank::from_json(const json& doc) {
  QuestionBank bank;
  try {
    bank.topic = chapter_from_json(doc.at("topic"));
    for (const auto& [key, arr] : doc.at("levels").items()) {
      int level = std::stoi(key);
      auto& bucket = bank.levels[level];
      for (const auto& q : arr) bucket.push_back(question_from_json(q));
    }
    if (doc.contains("transcript_refs")) {
      bank.transcript_refs = doc["transcript_refs"].get<std::vector<std::size_t>>();
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad bank file: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw ValidationError("bad bank file: level keys must be integers");
  }
  bank.validate();
  return bank;
}

QuestionBank QuestionBank::load(const std::filesystem::path& path) {
  std::string text = read_file(path);
  try {
    return from_json(json::parse(text));
  } catch (const json::parse_error& e) {
    throw ParseError(0, path.string() + ": " + e.what());
  }
}

void QuestionBank::save(const std::filesystem::path& path) const {
  write_file(path, to_json().dump(2) + "\n");
}

QuestionBank generate_bank(const ExperimentConfig& cfg, ChatClient& teacher,
                           const PromptBuilder& prompts) {
  cfg.validate();
  if (!prompts.curriculum().resolve(cfg.topic)) {
    throw ValidationError("topic does not resolve: " + to_string(cfg.topic));
  }
  QuestionBank bank;
  bank.topic = cfg.topic;
  std::vector<Question> accepted;

  std::vector<int> levels = cfg.levels;
  std::sort(levels.begin(), levels.end());
  for (int level : levels) {
    auto& bucket = bank.levels[level];
    int retries = 0;
    while (static_cast<int>(bucket.size()) < cfg.per_level) {
      std::size_t slot = bucket.size();
      int needed = cfg.per_level - static_cast<int>(slot);
      auto messages = prompts.generation_prompt(cfg.topic, level, needed, accepted);
      std::string reply = teacher.complete(messages);
      bank.transcript_refs.push_back(teacher.transcript()->size() - 1);

      std::vector<Question> parsed;
      std::string reason;
      try {
        parsed = parse_question_block(reply, cfg.topic);
      } catch (const MalformedBlock& e) {
        reason = e.what();
      }
      for (auto& q : parsed) {
        if (static_cast<int>(bucket.size()) == cfg.per_level) break;
        if (q.difficulty != level) {
          reason = "question rated " + std::to_string(q.difficulty) + " for level " +
                   std::to_string(level);
          continue;
        }
        bool dup = std::any_of(accepted.begin(), accepted.end(),
                               [&](const Question& prior) { return is_duplicate(prior, q); });
        if (dup) {
          reason = "duplicate stem: " + q.stem;
          continue;
        }
        accepted.push_back(q);
        bucket.push_back(std::move(q));
      }
      if (bucket.size() > slot) {
        retries = 0;
      } else if (++retries > kBankSlotRetries) {
        throw GenerationFailed(level, slot, reason.empty() ? "no usable question" : reason);
      }
    }
  }
  bank.validate();
  return bank;
}

namespace {

// Uniform draw in [0, bound] by rejection on raw 64-bit output, so the
// partition does not depend on the standard library's distributions.
std::uint64_t bounded(std::mt19937_64& engine, std::uint64_t bound) {
  const std::uint64_t range = bound + 1;
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % range;
  std::uint64_t x;
  do {
    x = engine();
  } while (x >= limit);
  return x % range;
}

}  // namespace

BankSplit split_bank(const QuestionBank& bank, std::uint64_t seed, int test_size,
                     int teach_size) {
  std::mt19937_64 engine(seed);
  BankSplit split;
  for (const auto& [level, questions] : bank.levels) {
    if (static_cast<int>(questions.size()) != test_size + teach_size) {
      throw ValidationError("level " + std::to_string(level) + " has " +
                            std::to_string(questions.size()) + " questions, expected " +
                            std::to_string(test_size + teach_size));
    }
    std::vector<std::size_t> order(questions.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = order.size(); i-- > 1;) {
      std::swap(order[i], order[bounded(engine, i)]);
    }
    std::vector<bool> is_teach(questions.size(), false);
    for (int k = 0; k < teach_size; ++k) is_teach[order[static_cast<std::size_t>(k)]] = true;
    LevelSplit& ls = split[level];
    for (std::size_t i = 0; i < questions.size(); ++i) {
      (is_teach[i] ? ls.teach : ls.test).push_back(questions[i]);
    }
  }
  return split;
}

void ensure_explanations(QuestionBank& bank, BankSplit& split, ChatClient& teacher,
                         const PromptBuilder& prompts) {
  for (auto& [level, ls] : split) {
    for (auto& q : ls.teach) {
      if (q.explanation) continue;
      std::string reply = teacher.complete(prompts.explanation_prompt(q));
      std::string text;
      for (const auto& line : split_lines(reply)) {
        std::string t = trim(line);
        if (t.empty()) continue;
        if (!text.empty()) text += " ";
        text += t;
      }
      if (starts_with_ci(text, "explanation:")) text = trim(text.substr(12));
      if (text.empty()) throw MissingExplanation(q.id);
      q.explanation = text;
      for (auto& bq : bank.levels[level]) {
        if (bq.id == q.id) bq.explanation = text;
      }
    }
  }
}

std::string CellResult::percentage() const {
  return format_percent(static_cast<std::int64_t>(correct), static_cast<std::int64_t>(attempts),
                        2, Rounding::HalfUp);
}

std::vector<CellResult> run_condition(const ExperimentConfig& cfg, const BankSplit& split,
                                      Condition condition, ChatClient& student,
                                      const PromptBuilder& prompts, const ProgressFn& progress) {
  std::atomic<std::size_t> done{0};
  std::vector<CellResult> cells;
  for (int level : cfg.levels) {
    auto it = split.find(level);
    if (it == split.end()) throw ValidationError("no split for level " + std::to_string(level));
    const LevelSplit& ls = it->second;
    const LevelSplit& examples_from =
        cfg.example_level ? split.at(*cfg.example_level) : ls;

    std::set<std::string> teach_ids;
    for (const auto& [l, s] : split) {
      for (const auto& q : s.teach) teach_ids.insert(q.id);
    }
    for (const auto& q : ls.test) {
      if (teach_ids.count(q.id)) throw ValidationError("teach question " + q.id + " in test set");
    }

    TeachingMode mode;
    switch (condition) {
      case Condition::Baseline:
        mode = TeachingMode::zero_shot();
        break;
      case Condition::TeachNoExplanation:
        mode = TeachingMode::with_examples(examples_from.teach);
        break;
      case Condition::TeachWithExplanation:
        for (const auto& q : examples_from.teach) {
          if (!q.explanation) throw MissingExplanation(q.id);
        }
        mode = TeachingMode::with_explanations(examples_from.teach);
        break;
    }

    std::vector<StudentJob> jobs;
    for (const auto& q : ls.test) {
      for (int t = 0; t < cfg.trials; ++t) jobs.push_back({q, mode});
    }
    auto runs = answer_all(student, prompts, jobs, cfg.max_in_flight, [&] {
      std::size_t n = ++done;
      if (progress) progress(n);
    });

    CellResult cell;
    cell.level = level;
    cell.condition = condition;
    for (const auto& run : runs) {
      ++cell.attempts;
      if (run.correct) ++cell.correct;
      if (run.parse_failed()) ++cell.parse_failures;
    }
    cells.push_back(cell);
  }
  return cells;
}

const CellResult& ExperimentResult::cell(int level, Condition condition) const {
  for (const auto& c : cells) {
    if (c.level == level && c.condition == condition) return c;
  }
  throw NotFound("no cell for level " + std::to_string(level) + ", " +
                 std::string(to_string(condition)));
}

ExperimentResult aggregate(const ExperimentConfig& cfg, std::vector<CellResult> fragments) {
  ExperimentResult result;
  result.config_hash = cfg.hash();
  result.seed = cfg.seed;
  result.topic = cfg.topic;
  result.trials = cfg.trials;
  result.levels = cfg.levels;
  std::sort(result.levels.begin(), result.levels.end());
  result.conditions = cfg.conditions;

  std::vector<std::string> missing;
  for (int level : result.levels) {
    for (Condition condition : result.conditions) {
      auto matches = std::count_if(fragments.begin(), fragments.end(), [&](const CellResult& c) {
        return c.level == level && c.condition == condition;
      });
      if (matches != 1) {
        missing.push_back(std::to_string(level) + "/" + std::string(to_string(condition)) +
                          (matches == 0 ? " missing" : " repeated"));
      }
    }
  }
  if (!missing.empty() || fragments.size() != result.levels.size() * result.conditions.size()) {
    std::string msg = "cells do not cover the configuration:";
    for (const auto& m : missing) msg += " " + m;
    throw IncompleteCells(msg);
  }
  auto rank = [&](Condition c) {
    return std::find(result.conditions.begin(), result.conditions.end(), c) -
           result.conditions.begin();
  };
  std::sort(fragments.begin(), fragments.end(), [&](const CellResult& a, const CellResult& b) {
    return a.level != b.level ? a.level < b.level : rank(a.condition) < rank(b.condition);
  });
  result.cells = std::move(fragments);
  return result;
}

json ExperimentResult::to_json() const {
  json cell_arr = json::array();
  for (const auto& c : cells) {
    cell_arr.push_back({{"level", c.level},
                        {"condition", std::string(to_string(c.condition))},
                        {"attempts", c.attempts},
                        {"correct", c.correct},
                        {"parse_failures", c.parse_failures},
                        {"percentage", c.percentage()}});
  }
  json cond = json::array();
  for (auto c : conditions) cond.push_back(std::string(to_string(c)));
  return {{"config_hash", config_hash}, {"seed", seed},
          {"topic", chapter_to_json(topic)}, {"trials", trials},
          {"levels", levels},             {"conditions", cond},
          {"cells", cell_arr},            {"started_at", started_at},
          {"finished_at", finished_at}};
}

ExperimentResult ExperimentResult::from_json(const json& doc) {
  ExperimentResult r;
  try {
    r.config_hash = doc.at("config_hash").get<std::string>();
    r.seed = doc.at("seed").get<std::uint64_t>();
    r.topic = chapter_from_json(doc.at("topic"));
    r.trials = doc.at("trials").get<int>();
    r.levels = doc.at("levels").get<std::vector<int>>();
    for (const auto& c : doc.at("conditions")) {
      r.conditions.push_back(condition_from_string(c.get<std::string>()));
    }
    for (const auto& c : doc.at("cells")) {
      CellResult cell;
      cell.level = c.at("level").get<int>();
      cell.condition = condition_from_string(c.at("condition").get<std::string>());
      cell.attempts = c.at("attempts").get<std::size_t>();
      cell.correct = c.at("correct").get<std::size_t>();
      cell.parse_failures = c.value("parse_failures", std::size_t{0});
      r.cells.push_back(cell);
    }
    r.started_at = doc.value("started_at", std::string());
    r.finished_at = doc.value("finished_at", std::string());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad result file: ") + e.what());
  }
  return r;
}

ExperimentResult ExperimentResult::load(const std::filesystem::path& path) {
  std::string text = read_file(path);
  try {
    return from_json(json::parse(text));
  } catch (const json::parse_error& e) {
    throw ParseError(0, path.string() + ": " + e.what());
  }
}

std::string ExperimentResult::render_table_text() const {
  std::vector<std::string> headers{"Difficulty Level"};
  for (auto c : conditions) headers.emplace_back(condition_heading(c));
  std::vector<std::vector<std::string>> rows;
  for (int level : levels) {
    std::vector<std::string> row{std::to_string(level)};
    for (auto c : conditions) row.push_back(cell(level, c).percentage() + "%");
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> widths;
  for (const auto& h : headers) widths.push_back(h.size());
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) widths[i] = std::max(widths[i], row[i].size());
  }
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& cols) {
    for (std::size_t i = 0; i < cols.size(); ++i) {
      if (i > 0) out << " | ";
      if (i + 1 == cols.size()) {
        out << cols[i];
      } else {
        out << std::left << std::setw(static_cast<int>(widths[i])) << cols[i];
      }
    }
    out << "\n";
  };
  emit(headers);
  for (std::size_t i = 0; i < headers.size(); ++i) {
    if (i > 0) out << "-+-";
    out << std::string(widths[i], '-');
  }
  out << "\n";
  for (const auto& row : rows) emit(row);
  return out.str();
}

std::string ExperimentResult::render_table_csv() const {
  std::ostringstream out;
  out << "level";
  for (auto c : conditions) out << "," << to_string(c);
  out << "\n";
  for (int level : levels) {
    out << level;
    for (auto c : conditions) out << "," << cell(level, c).percentage();
    out << "\n";
  }
  return out.str();
}

std::string finetune_jsonl(const QuestionBank& bank, const PromptBuilder& prompts) {
  std::string out;
  for (const auto& [level, questions] : bank.levels) {
    for (const auto& q : questions) {
      json record = {
          {"messages",
           json::array({{{"role", "user"}, {"content", prompts.finetune_request(q.chapter, q.difficulty)}},
                        {{"role", "assistant"}, {"content", render_question_block(q)}}})}};
      out += record.dump() + "\n";
    }
  }
  return out;
}

void export_finetune(const QuestionBank& bank, const PromptBuilder& prompts,
                     const std::filesystem::path& path) {
  write_file(path, finetune_jsonl(bank, prompts));
}

ExperimentRun run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  cfg.validate();
  if (options.output_dir.empty()) throw ValidationError("experiment output directory not set");
  Curriculum curriculum = load_curriculum(locate_curriculum(cfg.curriculum, options.data_dir));
  if (!curriculum.resolve(cfg.topic)) {
    throw ValidationError("topic does not resolve: " + to_string(cfg.topic));
  }
  PromptBuilder prompts(curriculum, TemplateSet::load(options.data_dir / "templates"));

  Clock clock = options.clock;
  if (!clock) {
    bool offline = cfg.teacher.backend == Backend::Mock && cfg.student.backend == Backend::Mock;
    clock = offline ? logical_clock() : system_clock();
  }
  std::filesystem::create_directories(options.output_dir);
  auto transcript_path = options.output_dir / "transcript.jsonl";
  std::filesystem::remove(transcript_path);
  auto log = std::make_shared<TranscriptLog>(transcript_path);
  auto teacher = make_client(cfg.teacher, log, clock);
  auto student = make_client(cfg.student, log, clock);

  ExperimentRun run;
  std::string started_at = clock();
  run.bank = generate_bank(cfg, *teacher, prompts);
  run.split = split_bank(run.bank, cfg.seed, cfg.test_size, cfg.teach_size);
  bool explain = std::find(cfg.conditions.begin(), cfg.conditions.end(),
                           Condition::TeachWithExplanation) != cfg.conditions.end();
  if (explain && cfg.generate_explanations) {
    ensure_explanations(run.bank, run.split, *teacher, prompts);
  }
  run.bank.save(options.output_dir / "bank.json");
  json split_doc = json::object();
  for (const auto& [level, ls] : run.split) {
    json test = json::array();
    json teach = json::array();
    for (const auto& q : ls.test) test.push_back(q.id);
    for (const auto& q : ls.teach) teach.push_back(q.id);
    split_doc[std::to_string(level)] = {{"test", test}, {"teach", teach}};
  }
  write_file(options.output_dir / "split.json", split_doc.dump(2) + "\n");

  const std::size_t per_condition =
      cfg.levels.size() * static_cast<std::size_t>(cfg.test_size * cfg.trials);
  const std::size_t total = per_condition * cfg.conditions.size();
  std::vector<CellResult> fragments;
  for (std::size_t k = 0; k < cfg.conditions.size(); ++k) {
    std::size_t offset = k * per_condition;
    auto cells = run_condition(cfg, run.split, cfg.conditions[k], *student, prompts,
                               [&](std::size_t done) {
                                 if (options.progress && total > 0) {
                                   options.progress(static_cast<double>(offset + done) /
                                                    static_cast<double>(total));
                                 }
                               });
    fragments.insert(fragments.end(), cells.begin(), cells.end());
  }
  run.result = aggregate(cfg, std::move(fragments));
  run.result.started_at = started_at;
  run.result.finished_at = clock();
  write_file(options.output_dir / "result.json", run.result.to_json().dump(2) + "\n");
  write_file(options.output_dir / "table2.txt", run.result.render_table_text());
  write_file(options.output_dir / "table2.csv", run.result.render_table_csv());
  return run;
}

}  // namespace adaptq
