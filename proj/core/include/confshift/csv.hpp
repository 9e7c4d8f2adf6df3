#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace confshift::csv {

//! A parsed CSV table: one header row plus string cells.
//! Row numbers reported in errors are 1-based data rows (the header is row 0).
struct Table
{
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(std::string_view name) const;
};

//! Splits a single CSV line on commas and trims surrounding whitespace.
//! Quoted fields are not supported; none of our formats need them.
std::vector<std::string> split_line(std::string_view line);

Table read_table(const std::filesystem::path& path);
Table parse_table(std::string_view text);

//! Strict real-number parse; throws ParseError naming the row and column.
double parse_real(std::string_view cell, std::size_t row, std::string_view column);

//! Shortest round-trip decimal representation of a double.
std::string format_real(double value);

void write_text(const std::filesystem::path& path, std::string_view text);

} // namespace confshift::csv
