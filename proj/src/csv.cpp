#include "fpglmm/csv.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>

#include "fpglmm/errors.hpp"

namespace fpglmm {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    std::size_t pos = line.find(',', start);
    std::string field = line.substr(start, pos == std::string::npos ? pos : pos - start);
    // trim surrounding whitespace
    std::size_t b = field.find_first_not_of(" \t\r");
    std::size_t e = field.find_last_not_of(" \t\r");
    out.push_back(b == std::string::npos ? std::string() : field.substr(b, e - b + 1));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError(path + ": cannot open file");
  CsvTable table;
  table.path = path;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      table.comments.push_back(line.substr(1));
      continue;
    }
    auto fields = split_fields(line);
    if (table.header.empty()) {
      table.header = std::move(fields);
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw InputError(path + ":" + std::to_string(lineno) + ": expected " +
                       std::to_string(table.header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    }
    table.rows.push_back(std::move(fields));
    table.row_lines.push_back(lineno);
  }
  if (table.header.empty()) throw InputError(path + ": missing header row");
  return table;
}

std::size_t column_index(const CsvTable& table, const std::string& name) {
  for (std::size_t i = 0; i < table.header.size(); ++i) {
    if (table.header[i] == name) return i;
  }
  throw InputError(table.path + ": missing required column '" + name + "'");
}

namespace {

[[noreturn]] void bad_field(const CsvTable& t, std::size_t row, std::size_t col,
                            const char* what) {
  throw InputError(t.path + ":" + std::to_string(t.row_lines[row]) + ": column '" +
                   t.header[col] + "': " + what + " ('" + t.rows[row][col] + "')");
}

} // namespace

double parse_double(const CsvTable& table, std::size_t row, std::size_t col) {
  const std::string& s = table.rows[row][col];
  if (s.empty()) bad_field(table, row, col, "empty numeric field");
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (errno != 0 || end == s.c_str() || *end != '\0') bad_field(table, row, col, "not a number");
  return v;
}

long parse_long(const CsvTable& table, std::size_t row, std::size_t col) {
  const std::string& s = table.rows[row][col];
  if (s.empty()) bad_field(table, row, col, "empty integer field");
  errno = 0;
  char* end = nullptr;
  long v = std::strtol(s.c_str(), &end, 10);
  if (errno != 0 || end == s.c_str() || *end != '\0') bad_field(table, row, col, "not an integer");
  return v;
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

} // namespace fpglmm
