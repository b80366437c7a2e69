#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "adaptq/curriculum.hpp"
#include "adaptq/prompting.hpp"
#include "adaptq/provider.hpp"
#include "adaptq/question.hpp"
#include "adaptq/util.hpp"
#include "json.hpp"

namespace adaptq {

enum class Condition { Baseline, TeachNoExplanation, TeachWithExplanation };

std::string_view to_string(Condition condition);
Condition condition_from_string(std::string_view s);
// Column heading used in rendered tables.
std::string_view condition_heading(Condition condition);

// Re-requests per bank slot after a malformed, duplicate or mis-rated reply.
inline constexpr int kBankSlotRetries = 3;

struct ExperimentConfig {
  std::string curriculum = "grade9-algebra";
  ChapterRef topic{"Algebra", "Solve linear equations: word problems"};
  std::vector<int> levels{1, 2, 3, 4, 5};
  int per_level = 10;
  int test_size = 7;
  int teach_size = 3;
  std::vector<Condition> conditions{Condition::Baseline, Condition::TeachNoExplanation,
                                    Condition::TeachWithExplanation};
  // Inferred from the 1/35 granularity of the reported percentages
  // (7 test questions x 5 trials).
  int trials = 5;
  std::uint64_t seed = 0;
  // Draw teaching examples from this level instead of the target's level.
  std::optional<int> example_level;
  std::size_t max_in_flight = 1;
  bool generate_explanations = true;
  ProviderConfig teacher = ProviderConfig::teacher_defaults();
  ProviderConfig student = ProviderConfig::student_defaults();

  // Throws ValidationError.
  void validate() const;

  // Relative script paths resolve against `base_dir`. The document itself is
  // kept for hashing.
  static ExperimentConfig from_json(const nlohmann::json& doc,
                                    const std::filesystem::path& base_dir = {});
  static ExperimentConfig load(const std::filesystem::path& path);

  // FNV-1a of the canonical dump of the source document.
  std::string hash() const;

  nlohmann::json source;
};

struct QuestionBank {
  ChapterRef topic;
  std::map<int, std::vector<Question>> levels;
  // Transcript sequence numbers of the generation exchanges.
  std::vector<std::size_t> transcript_refs;

  std::size_t size() const;
  std::vector<Question> all() const;

  // Throws ValidationError on duplicate stems or a question whose rating
  // differs from its level bucket.
  void validate() const;

  nlohmann::json to_json() const;
  static QuestionBank from_json(const nlohmann::json& doc);
  static QuestionBank load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;
};

struct LevelSplit {
  std::vector<Question> test;
  std::vector<Question> teach;
};

using BankSplit = std::map<int, LevelSplit>;

// Iterates levels in ascending order, asking the teacher for the missing
// questions of each level with every accepted stem so far as
// anti-duplication context. Throws GenerationFailed(level, slot) after
// kBankSlotRetries fruitless re-requests for one slot.
QuestionBank generate_bank(const ExperimentConfig& cfg, ChatClient& teacher,
                           const PromptBuilder& prompts);

// Seeded partition of each level into test and teach subsets. One
// mt19937_64 stream seeded with `seed` drives a Fisher-Yates shuffle per
// level (ascending level order, unbiased bounded draws by rejection); the
// first `teach_size` shuffled positions form the teach set. Both subsets keep
// bank order.
BankSplit split_bank(const QuestionBank& bank, std::uint64_t seed, int test_size = 7,
                     int teach_size = 3);

// Second teacher pass filling in missing explanations of teach-set
// questions, in both the split and the bank.
void ensure_explanations(QuestionBank& bank, BankSplit& split, ChatClient& teacher,
                         const PromptBuilder& prompts);

struct CellResult {
  int level = 1;
  Condition condition = Condition::Baseline;
  std::size_t attempts = 0;
  std::size_t correct = 0;
  std::size_t parse_failures = 0;

  // 100 * correct / attempts, half-up to two decimals.
  std::string percentage() const;
  bool operator==(const CellResult&) const = default;
};

using ProgressFn = std::function<void(std::size_t done)>;

// Every test question of every configured level, `trials` times, under the
// teaching mode the condition maps to. Parse failures count as attempts.
std::vector<CellResult> run_condition(const ExperimentConfig& cfg, const BankSplit& split,
                                      Condition condition, ChatClient& student,
                                      const PromptBuilder& prompts,
                                      const ProgressFn& progress = {});

struct ExperimentResult {
  std::string config_hash;
  std::uint64_t seed = 0;
  ChapterRef topic;
  int trials = 0;
  std::vector<int> levels;
  std::vector<Condition> conditions;
  std::vector<CellResult> cells;
  std::string started_at;
  std::string finished_at;

  const CellResult& cell(int level, Condition condition) const;

  nlohmann::json to_json() const;
  static ExperimentResult from_json(const nlohmann::json& doc);
  static ExperimentResult load(const std::filesystem::path& path);

  // Rows are difficulty levels, columns the conditions.
  std::string render_table_text() const;
  std::string render_table_csv() const;
};

// Orders the fragments by level then condition. Throws IncompleteCells when
// a configured (level, condition) cell is missing or repeated.
ExperimentResult aggregate(const ExperimentConfig& cfg, std::vector<CellResult> fragments);

// One JSON line per question, levels ascending:
//   {"messages":[{"role":"user","content":<request>},
//                {"role":"assistant","content":<question block>}]}
void export_finetune(const QuestionBank& bank, const PromptBuilder& prompts,
                     const std::filesystem::path& path);
std::string finetune_jsonl(const QuestionBank& bank, const PromptBuilder& prompts);

struct RunOptions {
  std::filesystem::path data_dir = default_data_dir();
  // Receives bank.json, split.json, transcript.jsonl, result.json,
  // table2.txt and table2.csv.
  std::filesystem::path output_dir;
  // Defaults to a logical clock when both providers are mocks.
  Clock clock;
  // Fraction of student attempts finished, in [0, 1].
  std::function<void(double)> progress;
};

struct ExperimentRun {
  QuestionBank bank;
  BankSplit split;
  ExperimentResult result;
};

ExperimentRun run_experiment(const ExperimentConfig& cfg, const RunOptions& options);

}  // namespace adaptq
