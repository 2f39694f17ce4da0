#include "fpirt/csv.hpp"

#include <charconv>
#include <cmath>

namespace fpirt {

CsvReader::CsvReader(std::istream& in, char delimiter) : in_(in), delim_(delimiter) {}

std::optional<std::vector<std::string>> CsvReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;

    record_line_ = line_;
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    std::size_t i = 0;
    for (;;) {
      if (i == line.size()) {
        if (quoted) {
          // Embedded newline inside a quoted field.
          std::string more;
          if (!std::getline(in_, more)) break;
          ++line_;
          if (!more.empty() && more.back() == '\r') more.pop_back();
          field.push_back('\n');
          line = std::move(more);
          i = 0;
          continue;
        }
        break;
      }
      const char c = line[i];
      if (quoted) {
        if (c == '"') {
          if (i + 1 < line.size() && line[i + 1] == '"') {
            field.push_back('"');
            ++i;
          } else {
            quoted = false;
          }
        } else {
          field.push_back(c);
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == delim_) {
        fields.push_back(std::move(field));
        field.clear();
      } else {
        field.push_back(c);
      }
      ++i;
    }
    fields.push_back(std::move(field));
    return fields;
  }
  return std::nullopt;
}

std::string csv_escape(std::string_view field, char delimiter) {
  const bool needs_quotes = field.find_first_of(std::string{'"', '\n', '\r', delimiter}) !=
                            std::string_view::npos;
  if (!needs_quotes) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << delim_;
    out_ << csv_escape(fields[i], delim_);
  }
  out_ << '\n';
}

std::string format_double(double x) {
  if (std::isnan(x)) return "NA";
  if (std::isinf(x)) return x > 0 ? "Inf" : "-Inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

}  // namespace fpirt
