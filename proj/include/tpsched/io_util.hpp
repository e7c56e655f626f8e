#pragma once

#include <charconv>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "tpsched/model.hpp"

namespace tpsched::ioutil {

inline std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) out.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

inline std::int64_t parse_i64(std::string_view tok, int line_no, const char* what) {
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
  if (ec != std::errc() || ptr != tok.data() + tok.size())
    fail(Errc::ParseError, "line " + std::to_string(line_no) + ": bad " + what + " '" + std::string(tok) + "'");
  return value;
}

inline std::string part_to_string(partition_id_t p) {
  if (p == kSystemPartition) return "sys";
  if (p == kBestEffortPartition) return "be";
  if (p == kIdlePartition) return "idle";
  return "P" + std::to_string(p);
}

inline partition_id_t part_from_string(std::string_view s, int line_no) {
  if (s == "sys") return kSystemPartition;
  if (s == "be") return kBestEffortPartition;
  if (s == "idle") return kIdlePartition;
  if (!s.empty() && s.front() == 'P')
    return static_cast<partition_id_t>(parse_i64(s.substr(1), line_no, "partition"));
  return static_cast<partition_id_t>(parse_i64(s, line_no, "partition"));
}

// Parses a detail value that must be an integer, e.g. boundary= or cmd=.
inline std::int64_t detail_i64(std::string_view detail, std::string_view key);

// Pulls `key=` out of a ';'-separated detail string; empty when absent.
inline std::string detail_value(std::string_view detail, std::string_view key) {
  std::size_t pos = 0;
  while (pos < detail.size()) {
    std::size_t end = detail.find(';', pos);
    if (end == std::string_view::npos) end = detail.size();
    std::string_view item = detail.substr(pos, end - pos);
    std::size_t eq = item.find('=');
    if (eq != std::string_view::npos && item.substr(0, eq) == key) return std::string(item.substr(eq + 1));
    pos = end + 1;
  }
  return {};
}

inline std::int64_t detail_i64(std::string_view detail, std::string_view key) {
  std::string v = detail_value(detail, key);
  if (v.empty())
    fail(Errc::ParseError, "event detail lacks '" + std::string(key) + "=' in '" + std::string(detail) + "'");
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), value);
  if (ec != std::errc() || ptr != v.data() + v.size())
    fail(Errc::ParseError, "bad integer for '" + std::string(key) + "' in '" + std::string(detail) + "'");
  return value;
}

}  // namespace tpsched::ioutil
