#pragma once

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace semex::util {

// Shortest round-trippable-enough decimal form used for every floating point
// cell we emit; output is locale-independent.
std::string format_double(double v);  // %.10g

// Column-checked CSV emitter. Cells must not contain commas or newlines
// (throws); the files we write never need quoting, and keeping the format
// quoting-free makes byte-for-byte reproducibility trivial to reason about.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, std::vector<std::string> columns);

  class Row {
   public:
    Row& add(const std::string& v);
    Row& add(const char* v) { return add(std::string(v)); }
    Row& add(double v) { return add(format_double(v)); }
    Row& add(std::int64_t v) { return add(std::to_string(v)); }
    Row& add(int v) { return add(static_cast<std::int64_t>(v)); }
    Row& add(bool) = delete;  // spell out 0/1 at the call site

   private:
    friend class CsvWriter;
    explicit Row(CsvWriter& w) : w_(w) {}
    CsvWriter& w_;
    std::vector<std::string> cells_;
  };

  Row row() { return Row(*this); }
  void write(Row& r);  // flushes; throws if the cell count mismatches
  std::size_t rows_written() const { return rows_; }
  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
  std::size_t columns_ = 0;
  std::size_t rows_ = 0;
};

// Minimal reader for the files CsvWriter produces: comma-separated, no
// quoting, first line is the header.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  int col(const std::string& name) const;  // -1 when absent
  const std::string& cell(std::size_t row, const std::string& name) const;
  double num(std::size_t row, const std::string& name) const;
};

CsvTable read_csv(const std::string& path);

}  // namespace semex::util
