#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace fpirt {

/// Minimal RFC 4180 reader: quoted fields, doubled quotes, CRLF tolerance.
class CsvReader {
 public:
  CsvReader(std::istream& in, char delimiter = ',');

  /// Next record, or nullopt at end of input. Blank lines are skipped.
  std::optional<std::vector<std::string>> next();

  /// 1-based physical line on which the last returned record started.
  std::size_t line() const { return record_line_; }

 private:
  std::istream& in_;
  char delim_;
  std::size_t line_ = 0;
  std::size_t record_line_ = 0;
};

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out, char delimiter = ',') : out_(out), delim_(delimiter) {}

  void row(const std::vector<std::string>& fields);
  std::ostream& stream() { return out_; }

 private:
  std::ostream& out_;
  char delim_;
};

std::string csv_escape(std::string_view field, char delimiter = ',');

/// Shortest round-trippable decimal representation.
std::string format_double(double x);

}  // namespace fpirt
