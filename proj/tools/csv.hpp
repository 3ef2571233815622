#pragma once

// Minimal RFC-4180 CSV reading and writing for the command-line tool.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "htpy/error.hpp"

namespace htpy::cli {

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string quote_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::string& version, std::uint64_t seed,
            const std::vector<std::string>& header)
      : out_(path, std::ios::binary | std::ios::trunc), width_(header.size()) {
    if (!out_) throw std::runtime_error("cannot open '" + path + "' for writing");
    out_ << "# htpy " << version << " seed=" << seed << "\n";
    row_strings(header);
  }

  void row(const std::vector<double>& values) {
    std::vector<std::string> s;
    s.reserve(values.size());
    for (double v : values) s.push_back(format_double(v));
    row_strings(s);
  }

  void row_strings(const std::vector<std::string>& fields) {
    if (fields.size() != width_) throw InvariantError("CSV row width does not match the header");
    for (std::size_t j = 0; j < fields.size(); ++j) {
      if (j > 0) out_ << ',';
      out_ << quote_field(fields[j]);
    }
    out_ << '\n';
    if (!out_) throw std::runtime_error("failed writing CSV output");
  }

 private:
  std::ofstream out_;
  std::size_t width_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] std::ptrdiff_t column(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j) {
      if (header[j] == name) return static_cast<std::ptrdiff_t>(j);
    }
    return -1;
  }

  [[nodiscard]] std::vector<double> numeric(std::size_t j) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      const std::string& f = rows[i][j];
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(f, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != f.size()) {
        throw InputError("row " + std::to_string(i + 1) + " column '" + header[j] + "': '" + f + "' is not a number");
      }
      out.push_back(v);
    }
    return out;
  }
};

namespace detail {

/// Splits one record; handles quoted fields spanning lines.
inline bool read_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  std::string field;
  bool quoted = false;
  bool any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      break;
    } else if (c != '\r') {
      field += c;
    }
  }
  if (!any) return false;
  if (quoted) throw InputError("unterminated quoted CSV field");
  fields.push_back(std::move(field));
  return true;
}

}  // namespace detail

/// Reads a CSV file, skipping blank lines and lines starting with '#'.
inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  CsvTable t;
  std::vector<std::string> fields;
  while (detail::read_record(in, fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (!fields.empty() && !fields[0].empty() && fields[0][0] == '#') continue;
    if (t.header.empty()) {
      t.header = fields;
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw InputError("'" + path + "' row " + std::to_string(t.rows.size() + 1) + " has " +
                       std::to_string(fields.size()) + " fields, expected " + std::to_string(t.header.size()));
    }
    t.rows.push_back(fields);
  }
  if (t.header.empty()) throw InputError("'" + path + "' has no header row");
  return t;
}

}  // namespace htpy::cli
