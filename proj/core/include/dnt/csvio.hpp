#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "dnt/error.hpp"

namespace dnt::csv {

/// Deterministic float formatting shared by every CSV artifact. Shortest-ish
/// round-trippable representation via %.9g; identical bytes for identical
/// doubles on a given platform.
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

inline std::string fmt(std::int64_t v) { return std::to_string(v); }
inline std::string fmt(int v) { return std::to_string(v); }
inline std::string fmt(std::size_t v) { return std::to_string(v); }
inline std::string fmt(bool v) { return v ? "1" : "0"; }
inline std::string fmt(const std::string& v) { return v; }
inline std::string fmt(const char* v) { return v; }

class Writer {
 public:
  Writer(const std::string& path, const std::vector<std::string>& header)
      : out_(path, std::ios::binary), columns_(header.size()) {
    if (!out_) throw Error("cannot open CSV for writing: " + path);
    write_cells(header);
  }

  template <typename... Ts>
  void row(const Ts&... cells) {
    std::vector<std::string> v{fmt(cells)...};
    if (v.size() != columns_)
      throw Error("CSV row arity mismatch: got " + std::to_string(v.size()) +
                  ", expected " + std::to_string(columns_));
    write_cells(v);
  }

  void row_vec(const std::vector<std::string>& cells) {
    if (cells.size() != columns_) throw Error("CSV row arity mismatch");
    write_cells(cells);
  }

 private:
  void write_cells(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
  }

  std::ofstream out_;
  std::size_t columns_;
};

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// Reads a whole CSV file. No quoting support; our formats never emit commas
/// inside cells.
inline Table read(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open CSV for reading: " + path);
  Table t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (line.back() == ',') cells.emplace_back();
    if (first) {
      t.header = std::move(cells);
      first = false;
    } else {
      t.rows.push_back(std::move(cells));
    }
  }
  return t;
}

}  // namespace dnt::csv
