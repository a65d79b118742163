#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace qcp::io {

// Shortest text that parses back to the same double.
std::string format_double(double v);

// Minimal CSV writer: no quoting, so fields must not contain commas or newlines.
class CsvWriter {
 public:
  // Throws IoError when the file cannot be opened.
  explicit CsvWriter(const std::filesystem::path& path);
  void row(const std::vector<std::string>& fields);
  void row(const std::vector<double>& values);

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Throws LookupError.
  std::size_t column(const std::string& name) const;
};

// Throws IoError when unreadable, SchemaError on ragged rows.
CsvTable read_csv(const std::filesystem::path& path);

// Throws SchemaError on a non-numeric field.
double parse_double(const std::string& text);

}  // namespace qcp::io
