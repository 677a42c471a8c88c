#pragma once

#include <boost/tokenizer.hpp>

#include <algorithm>
#include <cctype>

#include <charconv>
#include <cmath>
#include <cstddef>
#include <istream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "spconv/error.hpp"

namespace spconv::csv {

/// A parsed CSV table with a mandatory header row. Rows are 1-based in
/// messages, counting the header as row 1.
struct Table {
  std::string source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] std::size_t column(std::string_view name) const {
    for (std::size_t c = 0; c < header.size(); ++c)
      if (header[c] == name) return c;
    fail(ErrorCode::MissingColumn, source + ": missing column '" + std::string(name) + "'");
  }

  [[nodiscard]] bool has_column(std::string_view name) const {
    for (const auto& h : header)
      if (h == name) return true;
    return false;
  }

  [[nodiscard]] std::string where(std::size_t row, std::size_t col) const {
    return source + " row " + std::to_string(row + 2) + " column '" + header[col] + "'";
  }

  [[nodiscard]] double number(std::size_t row, std::size_t col) const {
    const std::string& cell = rows[row][col];
    double value = 0.0;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc{} || ptr != last || !std::isfinite(value))
      fail(ErrorCode::ParseError, where(row, col) + ": cannot parse number '" + cell + "'");
    return value;
  }

  [[nodiscard]] int integer(std::size_t row, std::size_t col) const {
    const std::string& cell = rows[row][col];
    int value = 0;
    auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc{} || ptr != cell.data() + cell.size())
      fail(ErrorCode::ParseError, where(row, col) + ": cannot parse integer '" + cell + "'");
    return value;
  }
};

inline std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

inline std::vector<std::string> split_line(const std::string& line) {
  using Separator = boost::escaped_list_separator<char>;
  boost::tokenizer<Separator> tokens(line, Separator('\\', ',', '"'));
  std::vector<std::string> out;
  for (const auto& t : tokens) out.push_back(trim(t));
  return out;
}

inline Table read(std::istream& in, std::string source) {
  Table table;
  table.source = std::move(source);
  std::string line;
  bool have_header = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!have_header) {
      // UTF-8 byte order mark
      if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
      if (trim(line).empty()) continue;
      table.header = split_line(line);
      have_header = true;
      continue;
    }
    if (trim(line).empty()) continue;
    std::vector<std::string> cells;
    try {
      cells = split_line(line);
    } catch (const boost::escaped_list_error& e) {
      fail(ErrorCode::ParseError, table.source + " line " + std::to_string(line_no) + ": " + e.what());
    }
    if (cells.size() != table.header.size())
      fail(ErrorCode::ParseError, table.source + " line " + std::to_string(line_no) + ": expected " +
                                      std::to_string(table.header.size()) + " fields, got " +
                                      std::to_string(cells.size()));
    table.rows.push_back(std::move(cells));
  }
  if (!have_header) fail(ErrorCode::ParseError, table.source + ": empty file, header row required");
  return table;
}

/// Quotes a field only when it contains a separator, quote or newline.
inline std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n\\") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

}  // namespace spconv::csv
