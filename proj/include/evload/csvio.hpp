#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace evload {

// Splits one CSV line. Handles double-quoted fields with "" escapes; embedded
// newlines are not supported (none of the formats here produce them).
std::vector<std::string> split_csv_line(std::string_view line);

// Reads lines, strips a trailing '\r', skips blank lines, and reports the
// 1-based line number of each row returned.
class CsvReader {
 public:
  explicit CsvReader(std::istream& in) : in_(in) {}

  // False at end of input.
  bool next_row(std::vector<std::string>& fields, std::size_t& line_number);

 private:
  std::istream& in_;
  std::size_t line_ = 0;
};

std::string join_csv(const std::vector<std::string>& fields);

}  // namespace evload
