#pragma once

#include <fstream>
#include <string>
#include <vector>

namespace mgm {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 if absent
};

CsvTable read_csv(const std::string& path);

// Comma-separated plain fields; fields must not contain commas or newlines.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, const std::vector<std::string>& header);
  void row(const std::vector<std::string>& fields);
  void flush() { out_.flush(); }

 private:
  std::string path_;
  std::ofstream out_;
  std::size_t width_ = 0;
};

// Shortest decimal that round-trips the value (for stable CSV output).
std::string format_float(double v);

}  // namespace mgm
