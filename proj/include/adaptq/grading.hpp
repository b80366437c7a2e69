#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "adaptq/percent.hpp"
#include "json.hpp"

namespace adaptq {

// One human judgement of a generated question.
struct GradingRecord {
  std::string question_id;
  std::string model;
  std::string course;
  bool correct = false;
  bool difficulty_ok = false;
  std::optional<std::string> note;

  bool operator==(const GradingRecord&) const = default;
};

inline constexpr std::string_view kGradingHeader = "question_id,model,course,correct,difficulty_ok,note";
inline constexpr std::size_t kGradesPerCell = 30;

// CSV with the header above. Booleans accept true/false, yes/no, 1/0 in any
// case. Quoted fields follow RFC 4180. Throws ParseError with the 1-based
// line of the offending row, including a repeated (question, model, course).
std::vector<GradingRecord> parse_grades(std::string_view csv);
std::vector<GradingRecord> import_grades(const std::filesystem::path& path);
std::string grades_to_csv(const std::vector<GradingRecord>& records);

struct Table1Cell {
  std::string course;
  std::string model;
  std::size_t graded = 0;
  std::size_t correct = 0;
  std::string percent;  // "90", no sign
};

// Rows are courses, columns models, both in first-appearance order.
struct Table1 {
  std::vector<std::string> courses;
  std::vector<std::string> models;
  std::vector<Table1Cell> cells;  // row-major
  Rounding rounding = Rounding::Truncate;

  const Table1Cell& cell(std::string_view course, std::string_view model) const;
  std::string render_text() const;
  std::string render_csv() const;
  nlohmann::json to_json() const;
};

// Throws IncompleteCell when a present (model, course) pair does not hold
// exactly `per_cell` records, or when a pair is absent altogether, and
// ValidationError on an empty record set.
Table1 report_table1(const std::vector<GradingRecord>& records,
                     std::size_t per_cell = kGradesPerCell,
                     Rounding rounding = Rounding::Truncate);

}  // namespace adaptq
