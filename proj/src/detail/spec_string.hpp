#pragma once

// Small helpers for the `name:key=value,key=value` spec strings used by the
// CLI-facing parsers.

#include <charconv>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "warpflow/error.hpp"

namespace warpflow::detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double to_double(std::string_view s, std::string_view what) {
  s = trim(s);
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ParseError("invalid number for " + std::string(what) + ": '" + std::string(s) + "'");
  }
  return value;
}

inline long to_int(std::string_view s, std::string_view what) {
  s = trim(s);
  long value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw ParseError("invalid integer for " + std::string(what) + ": '" + std::string(s) + "'");
  }
  return value;
}

/// Shortest decimal representation that round-trips.
inline std::string format_double(double x) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

/// Parses `key=value` items; rejects unknown keys and duplicates.
inline std::map<std::string, std::string> parse_params(
    const std::vector<std::string_view>& items, const std::vector<std::string>& allowed,
    std::string_view context) {
  std::map<std::string, std::string> out;
  for (auto item : items) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(std::string(context) + ": expected key=value, got '" + std::string(item) + "'");
    }
    std::string key(trim(item.substr(0, eq)));
    bool ok = false;
    for (const auto& a : allowed) ok = ok || a == key;
    if (!ok) throw ParseError(std::string(context) + ": unknown parameter '" + key + "'");
    if (!out.emplace(key, std::string(trim(item.substr(eq + 1)))).second) {
      throw ParseError(std::string(context) + ": duplicate parameter '" + key + "'");
    }
  }
  return out;
}

}  // namespace warpflow::detail
