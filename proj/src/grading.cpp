#include "adaptq/grading.hpp"

#include "adaptq/errors.hpp"
#include "adaptq/util.hpp"

#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>
#include <tuple>

namespace adaptq {

namespace {

// Splits RFC 4180 text into rows, tracking the line each row starts on.
struct CsvRow {
  std::size_t line;
  std::vector<std::string> fields;
};

std::vector<CsvRow> split_csv(std::string_view text) {
  std::vector<CsvRow> rows;
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  bool row_has_data = false;
  std::size_t line = 1;
  std::size_t row_line = 1;

  auto end_row = [&] {
    fields.push_back(std::move(field));
    field.clear();
    if (row_has_data || fields.size() > 1 || !fields.front().empty()) {
      rows.push_back({row_line, std::move(fields)});
    }
    fields.clear();
    row_has_data = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field += c;
      }
      continue;
    }
    switch (c) {
      case '"':
        if (!field.empty()) throw ParseError(line, "stray quote inside field");
        quoted = true;
        row_has_data = true;
        break;
      case ',':
        fields.push_back(std::move(field));
        field.clear();
        row_has_data = true;
        break;
      case '\r':
        break;
      case '\n':
        end_row();
        ++line;
        row_line = line;
        break;
      default:
        field += c;
    }
  }
  if (quoted) throw ParseError(row_line, "unterminated quoted field");
  if (!field.empty() || !fields.empty() || row_has_data) end_row();
  return rows;
}

bool parse_bool(const std::string& raw, std::size_t line, std::string_view column) {
  std::string v = to_lower(trim(raw));
  if (v == "true" || v == "yes" || v == "1" || v == "y") return true;
  if (v == "false" || v == "no" || v == "0" || v == "n") return false;
  throw ParseError(line, std::string(column) + ": expected a boolean, got '" + raw + "'");
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::vector<GradingRecord> parse_grades(std::string_view csv) {
  auto rows = split_csv(csv);
  if (rows.empty()) throw ParseError(1, "missing header");
  std::string header;
  for (std::size_t i = 0; i < rows[0].fields.size(); ++i) {
    if (i > 0) header += ",";
    header += trim(rows[0].fields[i]);
  }
  if (header != kGradingHeader) {
    throw ParseError(rows[0].line, "expected header '" + std::string(kGradingHeader) + "'");
  }
  std::vector<GradingRecord> out;
  std::set<std::tuple<std::string, std::string, std::string>> seen;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.fields.size() != 6) {
      throw ParseError(row.line, "expected 6 fields, found " + std::to_string(row.fields.size()));
    }
    GradingRecord rec;
    rec.question_id = trim(row.fields[0]);
    rec.model = trim(row.fields[1]);
    rec.course = trim(row.fields[2]);
    if (rec.question_id.empty() || rec.model.empty() || rec.course.empty()) {
      throw ParseError(row.line, "question_id, model and course must be non-empty");
    }
    rec.correct = parse_bool(row.fields[3], row.line, "correct");
    rec.difficulty_ok = parse_bool(row.fields[4], row.line, "difficulty_ok");
    if (!row.fields[5].empty()) rec.note = row.fields[5];
    if (!seen.emplace(rec.question_id, rec.model, rec.course).second) {
      throw ParseError(row.line, "duplicate record for " + rec.question_id + " (" + rec.model +
                                     ", " + rec.course + ")");
    }
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<GradingRecord> import_grades(const std::filesystem::path& path) {
  return parse_grades(read_file(path));
}

std::string grades_to_csv(const std::vector<GradingRecord>& records) {
  std::string out = std::string(kGradingHeader) + "\n";
  for (const auto& r : records) {
    out += csv_field(r.question_id) + "," + csv_field(r.model) + "," + csv_field(r.course) + "," +
           (r.correct ? "true" : "false") + "," + (r.difficulty_ok ? "true" : "false") + "," +
           csv_field(r.note.value_or("")) + "\n";
  }
  return out;
}

const Table1Cell& Table1::cell(std::string_view course, std::string_view model) const {
  for (const auto& c : cells) {
    if (c.course == course && c.model == model) return c;
  }
  throw NotFound("no Table 1 cell for (" + std::string(course) + ", " + std::string(model) + ")");
}

std::string Table1::render_text() const {
  std::vector<std::string> header{"Course"};
  header.insert(header.end(), models.begin(), models.end());
  std::vector<std::vector<std::string>> rows;
  for (const auto& course : courses) {
    std::vector<std::string> row{course};
    for (const auto& model : models) row.push_back(cell(course, model).percent + "%");
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> widths;
  for (const auto& h : header) widths.push_back(h.size());
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
  emit(header);
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i > 0) out << "-+-";
    out << std::string(widths[i], '-');
  }
  out << "\n";
  for (const auto& row : rows) emit(row);
  return out.str();
}

std::string Table1::render_csv() const {
  std::string out = "course";
  for (const auto& m : models) out += "," + csv_field(m);
  out += "\n";
  for (const auto& course : courses) {
    out += csv_field(course);
    for (const auto& model : models) out += "," + cell(course, model).percent;
    out += "\n";
  }
  return out;
}

nlohmann::json Table1::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& c : cells) {
    arr.push_back({{"course", c.course},
                   {"model", c.model},
                   {"graded", c.graded},
                   {"correct", c.correct},
                   {"percent", c.percent}});
  }
  return {{"courses", courses},
          {"models", models},
          {"rounding", std::string(to_string(rounding))},
          {"cells", arr}};
}

Table1 report_table1(const std::vector<GradingRecord>& records, std::size_t per_cell,
                     Rounding rounding) {
  if (records.empty()) throw ValidationError("no grading records");
  Table1 table;
  table.rounding = rounding;
  for (const auto& r : records) {
    if (std::find(table.courses.begin(), table.courses.end(), r.course) == table.courses.end()) {
      table.courses.push_back(r.course);
    }
    if (std::find(table.models.begin(), table.models.end(), r.model) == table.models.end()) {
      table.models.push_back(r.model);
    }
  }
  for (const auto& course : table.courses) {
    for (const auto& model : table.models) {
      Table1Cell c{course, model, 0, 0, {}};
      for (const auto& r : records) {
        if (r.course == course && r.model == model) {
          ++c.graded;
          if (r.correct) ++c.correct;
        }
      }
      if (c.graded != per_cell) throw IncompleteCell(model, course, c.graded);
      c.percent = format_percent(static_cast<std::int64_t>(c.correct),
                                 static_cast<std::int64_t>(c.graded), 0, rounding);
      table.cells.push_back(std::move(c));
    }
  }
  return table;
}

}  // namespace adaptq
