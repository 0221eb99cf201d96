#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace bc {

/// Shortest decimal representation that round-trips the double exactly.
std::string format_double(double v);

double parse_double(const std::string& s);

/// Minimal CSV writer; format_double keeps emitted numbers diff-stable.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);

  void row(const std::vector<std::string>& cells);
  void close();

 private:
  std::ofstream out_;
  std::size_t n_cols_;
};

std::vector<std::vector<std::string>> read_csv(const std::string& path);

}  // namespace bc
