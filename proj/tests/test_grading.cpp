#include "doctest.h"

#include "adaptq/errors.hpp"
#include "adaptq/grading.hpp"
#include "adaptq/percent.hpp"
#include "support.hpp"

#include <random>

using namespace adaptq;

namespace {

std::vector<GradingRecord> cell_records(const std::string& model, const std::string& course,
                                        std::size_t correct, std::size_t total = 30) {
  std::vector<GradingRecord> out;
  for (std::size_t i = 0; i < total; ++i) {
    out.push_back({model + "-" + course + "-" + std::to_string(i), model, course, i < correct,
                   true, std::nullopt});
  }
  return out;
}

}  // namespace

TEST_CASE("percent arithmetic") {
  CHECK(format_percent(27, 30, 0, Rounding::Truncate) == "90");
  CHECK(format_percent(15, 30, 0, Rounding::Truncate) == "50");
  CHECK(format_percent(30, 30, 0, Rounding::Truncate) == "100");
  CHECK(format_percent(23, 30, 0, Rounding::Truncate) == "76");
  CHECK(format_percent(23, 30, 0, Rounding::HalfUp) == "77");
  CHECK(format_percent(12, 35, 2, Rounding::HalfUp) == "34.29");
  CHECK(format_percent(1, 8, 1, Rounding::HalfUp) == "12.5");
  CHECK(format_percent(1, 200, 0, Rounding::HalfUp) == "1");
  CHECK(format_percent(0, 35, 2, Rounding::HalfUp) == "0.00");
  CHECK(rounding_from_string("half-up") == Rounding::HalfUp);
  CHECK(rounding_from_string("truncate") == Rounding::Truncate);
  CHECK_THROWS(rounding_from_string("banker"));
}

TEST_CASE("percent agrees with floating point away from ties") {
  for (int whole = 1; whole <= 60; ++whole) {
    for (int part = 0; part <= whole; ++part) {
      double exact = 100.0 * part / whole;
      std::int64_t truncated = scaled_percent(part, whole, 0, Rounding::Truncate);
      CHECK(truncated == static_cast<std::int64_t>(exact + 1e-9));
      std::int64_t rounded = scaled_percent(part, whole, 2, Rounding::HalfUp);
      CHECK(std::abs(static_cast<double>(rounded) - exact * 100.0) <= 0.5 + 1e-6);
    }
  }
}

TEST_CASE("table cells") {
  std::vector<GradingRecord> records;
  for (auto& r : cell_records("GPT-4", "Numbers", 27)) records.push_back(r);
  for (auto& r : cell_records("GPT-4", "Financial Mathematics", 30)) records.push_back(r);
  for (auto& r : cell_records("GPT-3.5", "Numbers", 15)) records.push_back(r);
  for (auto& r : cell_records("GPT-3.5", "Financial Mathematics", 23)) records.push_back(r);
  auto table = report_table1(records);
  CHECK(table.cell("Numbers", "GPT-4").percent == "90");
  CHECK(table.cell("Financial Mathematics", "GPT-4").percent == "100");
  CHECK(table.cell("Numbers", "GPT-3.5").percent == "50");
  CHECK(table.cell("Financial Mathematics", "GPT-3.5").percent == "76");
  CHECK(report_table1(records, 30, Rounding::HalfUp)
            .cell("Financial Mathematics", "GPT-3.5")
            .percent == "77");
  CHECK(table.models == std::vector<std::string>{"GPT-4", "GPT-3.5"});
  CHECK(table.render_csv().starts_with("course,GPT-4,GPT-3.5\n"));
  CHECK(table.render_text().find("90%") != std::string::npos);
  CHECK(table.to_json()["cells"].size() == 4);

  // Input order does not matter.
  std::shuffle(records.begin(), records.end(), std::mt19937_64(3));
  CHECK(report_table1(records).cell("Numbers", "GPT-4").correct == 27);
}

TEST_CASE("incomplete cells are refused") {
  auto records = cell_records("GPT-4", "Numbers", 27, 29);
  try {
    report_table1(records);
    FAIL("expected IncompleteCell");
  } catch (const IncompleteCell& e) {
    CHECK(e.count() == 29);
  }
  auto two = cell_records("A", "Numbers", 3);
  for (auto& r : cell_records("B", "Finance", 3)) two.push_back(r);
  CHECK_THROWS_AS(report_table1(two), IncompleteCell);
  CHECK_THROWS_AS(report_table1({}), ValidationError);
}

TEST_CASE("CSV parsing") {
  std::string csv = std::string(kGradingHeader) +
                    "\nq1,GPT-4,Numbers,true,yes,\n"
                    "q2,GPT-4,Numbers,0,N,\"odd, \"\"quoted\"\" note\"\n"
                    "q3,GPT-4,Numbers,Y,1,\"multi\nline\"\n";
  auto records = parse_grades(csv);
  REQUIRE(records.size() == 3);
  CHECK(records[0].correct);
  CHECK_FALSE(records[0].note.has_value());
  CHECK_FALSE(records[1].correct);
  CHECK_FALSE(records[1].difficulty_ok);
  CHECK(records[1].note == "odd, \"quoted\" note");
  CHECK(records[2].note == "multi\nline");
  CHECK(parse_grades(grades_to_csv(records)) == records);
}

TEST_CASE("CSV errors carry the line") {
  std::string header = std::string(kGradingHeader) + "\n";
  auto line_of = [](const std::string& text) -> std::size_t {
    try {
      parse_grades(text);
    } catch (const ParseError& e) {
      return e.line();
    }
    return 0;
  };
  CHECK(line_of(header + "q1,GPT-4,Numbers,true,true,\nq1,GPT-4,Numbers,false,true,\n") == 3);
  CHECK(line_of(header + "q1,GPT-4,Numbers,maybe,true,\n") == 2);
  CHECK(line_of(header + "q1,GPT-4,Numbers,true\n") == 2);
  CHECK(line_of(header + "q1,,Numbers,true,true,\n") == 2);
  CHECK(line_of("id,model\n") == 1);
  CHECK(line_of(header + "q1,GPT-4,Numbers,true,true,\n") == 0);
}

TEST_CASE("bundled grading fixture") {
  auto records = import_grades(testing::fixture("grades-table1.csv"));
  CHECK(records.size() == 180);
  auto table = report_table1(records);
  CHECK(table.cell("Numbers", "GPT-3.5").percent == "50");
  CHECK(table.cell("Numbers", "GPT-4").percent == "90");
  CHECK(table.cell("Financial Mathematics", "GPT-3.5").percent == "76");
  CHECK(table.cell("Financial Mathematics", "GPT-3.5 Fine-Tuned").percent == "70");
  CHECK(table.cell("Financial Mathematics", "GPT-4").percent == "93");
}
