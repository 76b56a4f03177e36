#ifndef FPGLMM_CSV_HPP
#define FPGLMM_CSV_HPP

#include <cstddef>
#include <string>
#include <vector>

namespace fpglmm {

// Comma-separated table. '#'-prefixed lines are kept aside as comments;
// blank lines are skipped. UTF-8, '.' decimal point, no quoting.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> row_lines; // 1-based source line per row
  std::vector<std::string> comments;  // without the leading '#'
  std::string path;
};

CsvTable read_csv(const std::string& path);

std::vector<std::string> split_fields(const std::string& line);

// Column index by exact header name; throws InputError when absent.
std::size_t column_index(const CsvTable& table, const std::string& name);

double parse_double(const CsvTable& table, std::size_t row, std::size_t col);
long parse_long(const CsvTable& table, std::size_t row, std::size_t col);

// 17 significant digits: round-trips any double exactly.
std::string format_double(double x);

} // namespace fpglmm

#endif
