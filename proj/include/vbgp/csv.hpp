#pragma once

#include <string>
#include <vector>

namespace vbgp {

// Shortest representation that round-trips the double exactly.
std::string format_double(double v);
double parse_double(const std::string& text);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // throws if absent
  double number(std::size_t row, int col) const;
};

// Comma-separated, header row first, LF line endings, UTF-8. Fields are
// written verbatim; none of the library's outputs need quoting.
void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

CsvTable read_csv(const std::string& path);

}  // namespace vbgp
