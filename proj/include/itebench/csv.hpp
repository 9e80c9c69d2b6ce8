#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace itebench::csv {

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  /// Column position by name, or throws ParseError.
  std::size_t column(std::string_view name) const;
};

/// RFC-4180 reader. The first record is the header.
Table read(std::istream& in);
Table read_file(const std::filesystem::path& path);

/// Quotes a field when it contains a comma, quote or line break.
std::string quote(std::string_view field);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

/// Shortest round-trip representation (17 significant digits).
std::string format_real(double v);

/// Strict numeric parse of a whole cell; throws ParseError naming row/column.
double parse_real(std::string_view cell, std::size_t row, std::size_t col);

}  // namespace itebench::csv
