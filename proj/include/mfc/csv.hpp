#pragma once

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfc {
namespace csv {

/// Shortest round-trip decimal representation of a double.
inline std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // find shortest precision that round-trips
  for (int prec = 1; prec < 17; ++prec) {
    char cand[40];
    std::snprintf(cand, sizeof(cand), "%.*g", prec, v);
    double back = 0.0;
    std::sscanf(cand, "%lf", &back);
    if (back == v) return std::string(cand);
  }
  return std::string(buf);
}

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw std::runtime_error("csv: cannot open " + path);
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';  // LF only
  }

 private:
  std::ofstream out_;
};

}  // namespace csv
}  // namespace mfc
