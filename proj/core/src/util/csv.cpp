#include "semex/util/csv.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace semex::util {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

CsvWriter::CsvWriter(const std::string& path, std::vector<std::string> columns)
    : path_(path), out_(path, std::ios::trunc), columns_(columns.size()) {
  if (!out_) throw std::runtime_error("cannot open for writing: " + path);
  if (columns.empty()) throw std::invalid_argument("csv needs at least one column");
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (i) out_ << ',';
    out_ << columns[i];
  }
  out_ << '\n';
  out_.flush();
}

CsvWriter::Row& CsvWriter::Row::add(const std::string& v) {
  if (v.find_first_of(",\n\r") != std::string::npos)
    throw std::invalid_argument("csv cell contains separator: " + v);
  cells_.push_back(v);
  return *this;
}

void CsvWriter::write(Row& r) {
  if (r.cells_.size() != columns_)
    throw std::logic_error("csv row has " + std::to_string(r.cells_.size()) +
                           " cells, header has " + std::to_string(columns_));
  for (std::size_t i = 0; i < r.cells_.size(); ++i) {
    if (i) out_ << ',';
    out_ << r.cells_[i];
  }
  out_ << '\n';
  out_.flush();
  if (!out_) throw std::runtime_error("write failed: " + path_);
  ++rows_;
}

int CsvTable::col(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i)
    if (columns[i] == name) return static_cast<int>(i);
  return -1;
}

const std::string& CsvTable::cell(std::size_t row, const std::string& name) const {
  const int c = col(name);
  if (c < 0) throw std::out_of_range("no such csv column: " + name);
  return rows.at(row).at(static_cast<std::size_t>(c));
}

double CsvTable::num(std::size_t row, const std::string& name) const {
  const std::string& s = cell(row, name);
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("not a number: " + s);
  return v;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open: " + path);
  CsvTable t;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (line.empty() || line.back() == ',') cells.push_back("");
    if (first) {
      t.columns = std::move(cells);
      first = false;
    } else {
      if (cells.size() != t.columns.size())
        throw std::runtime_error("ragged csv row in " + path);
      t.rows.push_back(std::move(cells));
    }
  }
  if (first) throw std::runtime_error("empty csv: " + path);
  return t;
}

}  // namespace semex::util
