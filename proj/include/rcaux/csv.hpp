#pragma once

// Deterministic CSV emission. Doubles use std::to_chars shortest round-trip
// so identical values always format to identical bytes.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace rcaux {

inline std::string format_double(double v) {
  char buf[40];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc{}) throw std::runtime_error("format_double failed");
  return std::string(buf, p);
}

class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header)
      : os_(path), n_cols_(header.size()) {
    if (!os_) throw std::runtime_error("cannot open for writing: " + path);
    write_raw(header);
  }

  class Row {
   public:
    explicit Row(CsvWriter& w) : w_(w) {}
    Row& add(const std::string& s) {
      cells_.push_back(s);
      return *this;
    }
    Row& add(const char* s) { return add(std::string(s)); }
    Row& add(double v) { return add(format_double(v)); }
    Row& add(int v) { return add(std::to_string(v)); }
    Row& add(long v) { return add(std::to_string(v)); }
    Row& add(unsigned long v) { return add(std::to_string(v)); }
    Row& add(unsigned long long v) { return add(std::to_string(v)); }
    Row& add(bool v) { return add(std::string(v ? "1" : "0")); }
    void done() { w_.write_row(cells_); }

   private:
    CsvWriter& w_;
    std::vector<std::string> cells_;
  };

  Row row() { return Row(*this); }

  void write_row(const std::vector<std::string>& cells) {
    if (cells.size() != n_cols_)
      throw std::runtime_error("CSV row width mismatch");
    write_raw(cells);
  }

  void flush() { os_.flush(); }

 private:
  void write_raw(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) os_ << ',';
      os_ << cells[i];
    }
    os_ << '\n';
  }

  std::ofstream os_;
  std::size_t n_cols_;
};

}  // namespace rcaux
