#ifndef DEMANDMAP_CSV_HPP_
#define DEMANDMAP_CSV_HPP_

#include <string>
#include <vector>

namespace demandmap {

// RFC-4180 table: header row plus data rows. Quoted fields may contain
// separators, doubled quotes and embedded newlines; CRLF and LF both accepted.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  // Comment lines ("# ...") seen before the header, without the leading '#'.
  std::vector<std::string> leading_comments;

  // Index of a header column, or -1.
  int column(const std::string& name) const;
};

CsvTable parse_csv(const std::string& text, bool allow_comments = false);
CsvTable read_csv(const std::string& path, bool allow_comments = false);

std::string format_csv_field(const std::string& value);
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows,
               const std::vector<std::string>& leading_comments = {});

}  // namespace demandmap

#endif  // DEMANDMAP_CSV_HPP_
