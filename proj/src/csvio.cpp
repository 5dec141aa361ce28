#include "mgm/csvio.hpp"

#include <cstdio>

#include "mgm/error.hpp"

namespace mgm {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

void check_field(const std::string& f, const std::string& path) {
  if (f.find(',') != std::string::npos || f.find('\n') != std::string::npos) {
    throw ContractError("csv field with separator written to " + path + ": '" + f + "'");
  }
}

}  // namespace

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return static_cast<int>(i);
  }
  return -1;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open csv: " + path);
  CsvTable table;
  std::string line;
  if (!std::getline(in, line)) throw FormatError(path + ": empty csv");
  table.header = split_fields(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != table.header.size()) {
      throw FormatError(path + ": row with " + std::to_string(fields.size()) + " fields, header has " +
                        std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  return table;
}

CsvWriter::CsvWriter(const std::string& path, const std::vector<std::string>& header)
    : path_(path), out_(path), width_(header.size()) {
  if (!out_) throw IoError("cannot write csv: " + path);
  if (header.empty()) throw ContractError("csv header must be nonempty");
  for (std::size_t i = 0; i < header.size(); ++i) {
    check_field(header[i], path_);
    out_ << header[i] << (i + 1 == header.size() ? "\n" : ",");
  }
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  if (fields.size() != width_) {
    throw ContractError("csv row width " + std::to_string(fields.size()) + " vs header " +
                        std::to_string(width_) + " in " + path_);
  }
  for (std::size_t i = 0; i < fields.size(); ++i) {
    check_field(fields[i], path_);
    out_ << fields[i] << (i + 1 == fields.size() ? "\n" : ",");
  }
  if (!out_) throw IoError("csv write failed: " + path_);
}

std::string format_float(double v) {
  char buf[64];
  for (int prec = 6; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::stod(buf) == v) break;
  }
  return buf;
}

}  // namespace mgm
