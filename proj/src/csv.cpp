#include "demandmap/csv.hpp"

#include <sstream>

#include "demandmap/common.hpp"

namespace demandmap {

int CsvTable::column(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

namespace {

// Splits the full text into records honoring quoted fields.
std::vector<std::vector<std::string>> parse_records(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  size_t i = 0;
  auto end_field = [&] {
    record.push_back(field);
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(record));
    record.clear();
  };
  while (i < text.size()) {
    char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"' && field.empty() && !field_started) {
      in_quotes = true;
      field_started = true;
    } else if (c == ',') {
      end_field();
      field_started = false;
    } else if (c == '\r') {
      // swallow; LF handles the record break
    } else if (c == '\n') {
      end_record();
    } else {
      field.push_back(c);
      field_started = true;
    }
    ++i;
  }
  if (in_quotes) throw SchemaError("unterminated quoted CSV field");
  if (field_started || !field.empty() || !record.empty()) end_record();
  return records;
}

}  // namespace

CsvTable parse_csv(const std::string& text, bool allow_comments) {
  CsvTable table;
  std::string body = text;
  if (allow_comments) {
    size_t pos = 0;
    while (pos < body.size() && body[pos] == '#') {
      size_t eol = body.find('\n', pos);
      if (eol == std::string::npos) eol = body.size();
      table.leading_comments.push_back(trim(body.substr(pos + 1, eol - pos - 1)));
      pos = eol == body.size() ? eol : eol + 1;
    }
    body = body.substr(pos);
  }
  auto records = parse_records(body);
  if (records.empty()) throw SchemaError("CSV has no header row");
  table.header = records.front();
  table.rows.assign(records.begin() + 1, records.end());
  // Drop a trailing fully-empty record produced by a final newline.
  while (!table.rows.empty() && table.rows.back().size() == 1 && table.rows.back()[0].empty()) {
    table.rows.pop_back();
  }
  return table;
}

CsvTable read_csv(const std::string& path, bool allow_comments) {
  return parse_csv(read_text_file(path), allow_comments);
}

std::string format_csv_field(const std::string& value) {
  bool needs_quotes = value.find_first_of(",\"\r\n") != std::string::npos;
  if (!needs_quotes) return value;
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows,
               const std::vector<std::string>& leading_comments) {
  std::ostringstream out;
  for (const auto& c : leading_comments) out << "# " << c << "\n";
  for (size_t i = 0; i < header.size(); ++i) {
    if (i) out << ',';
    out << format_csv_field(header[i]);
  }
  out << "\n";
  for (const auto& row : rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << format_csv_field(row[i]);
    }
    out << "\n";
  }
  write_text_file(path, out.str());
}

}  // namespace demandmap
