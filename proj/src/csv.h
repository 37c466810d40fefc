#pragma once

// Minimal CSV helpers shared by the model and trace readers.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "slicer/error.h"

namespace slicer::csv {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    fields.push_back(trim(line.substr(start, pos == std::string_view::npos ? pos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

inline double parse_double(std::string_view field, int line) {
  double value = 0.0;
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError("not a number: '" + std::string(field) + "'", line);
  }
  return value;
}

// Shortest representation that parses back to the same double.
inline std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

struct Table {
  std::vector<std::string> header;
  // Each row paired with its 1-based source line number.
  std::vector<std::pair<int, std::vector<std::string_view>>> rows;
  std::vector<std::string> lines;
};

// Reads a headed CSV file. Blank lines are skipped.
inline Table read(const std::filesystem::path& path, const std::vector<std::string>& expected_header) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  Table table;
  std::string line;
  while (std::getline(in, line)) table.lines.push_back(line);

  int header_line = 0;
  for (std::size_t i = 0; i < table.lines.size(); ++i) {
    if (trim(table.lines[i]).empty()) continue;
    header_line = static_cast<int>(i) + 1;
    for (auto f : split(table.lines[i])) table.header.emplace_back(f);
    break;
  }
  if (header_line == 0) throw ParseError("empty file " + path.string(), 0);
  if (table.header != expected_header) {
    std::string want;
    for (const auto& h : expected_header) want += (want.empty() ? "" : ",") + h;
    throw ParseError("expected header '" + want + "'", header_line);
  }
  for (std::size_t i = static_cast<std::size_t>(header_line); i < table.lines.size(); ++i) {
    std::string_view view = table.lines[i];
    if (trim(view).empty()) continue;
    auto fields = split(view);
    if (fields.size() != expected_header.size()) {
      throw ParseError("expected " + std::to_string(expected_header.size()) + " fields, got " +
                           std::to_string(fields.size()),
                       static_cast<int>(i) + 1);
    }
    table.rows.emplace_back(static_cast<int>(i) + 1, std::move(fields));
  }
  return table;
}

}  // namespace slicer::csv
