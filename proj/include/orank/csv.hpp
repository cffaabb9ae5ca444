#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace orank::csv {

/// Parsed comma-separated table. No quoting; fields are trimmed of spaces and '\r'.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column index of `name`, or throws ParseError naming it.
  std::size_t column(std::string_view name) const;
};

Table read(const std::filesystem::path& path);

/// Parses a full-field double; throws ParseError with 1-based row/column (row 1 is the header).
double to_double(const std::string& field, std::size_t row, std::size_t column);

/// 17 significant digits, enough to round-trip any double.
std::string format_double(double v);

}  // namespace orank::csv
