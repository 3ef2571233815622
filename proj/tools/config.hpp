#pragma once

// Flat `key = value` run configuration. Keys name the subcommand's long
// flags (underscores and dashes are interchangeable); a value may hold several
// whitespace-separated tokens for list flags. Entries are turned into flag
// arguments placed ahead of the command line, and keys also given as flags are
// dropped, so flags win.

#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "htpy/error.hpp"

namespace htpy::cli {

struct ConfigEntry {
  std::string key;
  std::vector<std::string> tokens;
  std::size_t line = 0;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_value(const std::string& v, const std::string& where) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  bool have = false;
  for (char c : v) {
    if (quoted) {
      if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
      have = true;
    } else if (c == ' ' || c == '\t' || c == ',') {
      if (have) out.push_back(cur);
      cur.clear();
      have = false;
    } else {
      cur += c;
      have = true;
    }
  }
  if (quoted) throw InputError(where + ": unterminated quote");
  if (have) out.push_back(cur);
  return out;
}

}  // namespace detail

inline std::string normalize_key(std::string k) {
  for (char& c : k) {
    if (c == '_') c = '-';
  }
  return k;
}

inline std::vector<ConfigEntry> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config '" + path + "'");
  std::vector<ConfigEntry> out;
  std::set<std::string> seen;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string where = path + ":" + std::to_string(line);
    std::string s = detail::trim(raw);
    if (s.empty() || s[0] == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw InputError(where + ": expected 'key = value'");
    ConfigEntry e{normalize_key(detail::trim(s.substr(0, eq))), {}, line};
    if (e.key.empty()) throw InputError(where + ": empty key");
    std::string value = detail::trim(s.substr(eq + 1));
    if (!value.empty() && value[0] != '"') {
      const auto hash = value.find(" #");
      if (hash != std::string::npos) value = detail::trim(value.substr(0, hash));
    }
    e.tokens = detail::split_value(value, where);
    if (e.tokens.empty()) throw InputError(where + ": key '" + e.key + "' has no value");
    if (!seen.insert(e.key).second) throw InputError(where + ": duplicate key '" + e.key + "'");
    out.push_back(std::move(e));
  }
  return out;
}

/// Long flag names present in `args` ("--name" or "--name=value").
inline std::set<std::string> given_flags(const std::vector<std::string>& args) {
  std::set<std::string> out;
  for (const auto& a : args) {
    if (a.rfind("--", 0) != 0 || a.size() == 2) continue;
    out.insert(normalize_key(a.substr(2, a.find('=') == std::string::npos ? std::string::npos : a.find('=') - 2)));
  }
  return out;
}

}  // namespace htpy::cli
