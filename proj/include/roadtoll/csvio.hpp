#pragma once

#include <string>
#include <vector>

namespace roadtoll {

// Shortest decimal representation that round-trips the double exactly, so
// golden CSV files are stable across runs.
std::string format_double(double value);

std::string csv_text(const std::vector<std::string>& header,
                     const std::vector<std::vector<std::string>>& rows);

void write_csv(const std::string& path, const std::vector<std::string>& header,
               const std::vector<std::vector<std::string>>& rows);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::string& path);

}  // namespace roadtoll
