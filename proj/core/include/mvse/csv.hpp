// SPDX-License-Identifier: Apache-2.0
//
// Minimal comma-separated tables: header row, no quoting. Reals are written
// in shortest round-trip form, so parsing recovers them exactly.
#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace mvse {

std::string format_real(double v);
/// Parses a whole field as a double; throws FormatError on failure.
double parse_real(std::string_view text, std::size_t line, std::string_view field);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Rejects cells containing separators, quotes or line breaks.
void write_csv(std::ostream& out, const CsvTable& table);
CsvTable read_csv(std::istream& in);
CsvTable read_csv(const std::filesystem::path& path);

/// Numeric table with named columns.
struct NumericTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  friend bool operator==(const NumericTable&, const NumericTable&) = default;
};

NumericTable to_numeric(const CsvTable& table);

}  // namespace mvse
