#pragma once

#include <ostream>
#include <string>
#include <variant>
#include <vector>

namespace hdaipw {

/// A CSV cell: text, integer or floating point (written with 17 significant digits).
using CsvCell = std::variant<std::string, long long, double>;

std::string format_double(double x);

/// Writes a header row followed by data rows; throws if a row has the wrong width.
class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> header);

  void add_row(std::vector<CsvCell> row);
  std::size_t rows() const { return rows_.size(); }
  void write(std::ostream& out) const;
  void write_file(const std::string& path) const;
  std::string str() const;

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<CsvCell>> rows_;
};

}  // namespace hdaipw
