#include "confshift/csv.hpp"

#include "confshift/errors.hpp"

#include <array>
#include <cmath>
#include <charconv>
#include <fstream>
#include <sstream>

namespace confshift::csv {

namespace {

std::string_view
trim(std::string_view s)
{
  const auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n';
  };
  while (!s.empty() && is_space(s.front()))
    s.remove_prefix(1);
  while (!s.empty() && is_space(s.back()))
    s.remove_suffix(1);
  return s;
}

} // namespace

std::optional<std::size_t>
Table::column(std::string_view name) const
{
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == name)
      return i;
  return std::nullopt;
}

std::vector<std::string>
split_line(std::string_view line)
{
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    const auto cell =
      line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
    out.emplace_back(trim(cell));
    if (pos == std::string_view::npos)
      break;
    start = pos + 1;
  }
  return out;
}

Table
parse_table(std::string_view text)
{
  Table table;
  bool have_header = false;
  std::size_t data_row = 0;
  std::size_t pos = 0;
  // strip a UTF-8 byte order mark
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF")
    pos = 3;
  while (pos <= text.size()) {
    auto eol = text.find('\n', pos);
    if (eol == std::string_view::npos)
      eol = text.size();
    const auto line = trim(text.substr(pos, eol - pos));
    pos = eol + 1;
    if (line.empty()) {
      if (eol == text.size())
        break;
      continue;
    }
    auto cells = split_line(line);
    if (!have_header) {
      table.header = std::move(cells);
      have_header = true;
    } else {
      ++data_row;
      if (cells.size() != table.header.size())
        throw ParseError("row " + std::to_string(data_row) + ": expected " +
                         std::to_string(table.header.size()) + " fields, got " +
                         std::to_string(cells.size()));
      table.rows.push_back(std::move(cells));
    }
    if (eol == text.size())
      break;
  }
  if (!have_header)
    throw ParseError("missing header row");
  return table;
}

Table
read_table(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw IoError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad())
    throw IoError("failed reading " + path.string());
  return parse_table(buf.str());
}

double
parse_real(std::string_view cell, std::size_t row, std::string_view column)
{
  double value = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+')
    ++first;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (cell.empty() || ec != std::errc() || ptr != last)
    throw ParseError("row " + std::to_string(row) + ": column '" + std::string(column) +
                     "' is not a number: '" + std::string(cell) + "'");
  if (!std::isfinite(value))
    throw ParseError("row " + std::to_string(row) + ": column '" + std::string(column) +
                     "' is not finite: '" + std::string(cell) + "'");
  return value;
}

std::string
format_real(double value)
{
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  (void)ec;
  return std::string(buf.data(), ptr);
}

void
write_text(const std::filesystem::path& path, std::string_view text)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw IoError("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out)
    throw IoError("failed writing " + path.string());
}

} // namespace confshift::csv
