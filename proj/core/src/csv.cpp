// SPDX-License-Identifier: Apache-2.0
#include "mvse/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

#include "mvse/error.hpp"

namespace mvse {

std::string format_real(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_real(std::string_view text, std::size_t line, std::string_view field) {
  double v = 0.0;
  const auto* end = text.data() + text.size();
  const auto res = std::from_chars(text.data(), end, v);
  if (text.empty() || res.ec != std::errc{} || res.ptr != end || !std::isfinite(v)) {
    throw FormatError(line, std::string(field), "not a finite number: '" + std::string(text) + "'");
  }
  return v;
}

namespace {

void write_row(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (cells[i].find_first_of(",\"\r\n") != std::string::npos) {
      throw InvalidArgument("CSV cell may not contain separators or quotes: '" + cells[i] + "'");
    }
    if (i > 0) out << ',';
    out << cells[i];
  }
  out << '\n';
}

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.emplace_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace

void write_csv(std::ostream& out, const CsvTable& table) {
  write_row(out, table.header);
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw InvalidArgument("CSV row width does not match the header");
    write_row(out, row);
  }
}

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.empty()) continue;
    auto cells = split(text);
    if (t.header.empty()) {
      t.header = std::move(cells);
    } else {
      if (cells.size() != t.header.size()) {
        throw FormatError(line, "row", "expected " + std::to_string(t.header.size()) + " columns, got " +
                                           std::to_string(cells.size()));
      }
      t.rows.push_back(std::move(cells));
    }
  }
  if (t.header.empty()) throw FormatError(1, "header", "missing header row");
  return t;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_csv(in);
}

NumericTable to_numeric(const CsvTable& table) {
  NumericTable out;
  out.columns = table.header;
  out.rows.reserve(table.rows.size());
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    std::vector<double> row;
    row.reserve(table.header.size());
    for (std::size_t j = 0; j < table.header.size(); ++j) row.push_back(parse_real(table.rows[i][j], i + 2, table.header[j]));
    out.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace mvse
