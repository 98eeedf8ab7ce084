#pragma once

#include <string>
#include <vector>

namespace epsim {

// Minimal CSV table: header row plus numeric/text cells. Lines starting with
// '#' are comments and are kept separately so footers survive a round trip.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> comments;

  std::string to_string() const;
  static CsvTable parse(const std::string& text);

  int column(const std::string& name) const;
  double number(std::size_t row, const std::string& name) const;
};

/// Shortest text that parses back to exactly the same double.
std::string format_double(double x);
double parse_double(const std::string& s);

}  // namespace epsim
