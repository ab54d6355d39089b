#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace depthpack::csv {

// "# depthpack <version>" comment line that starts every CSV we write.
void write_version_comment(std::ostream& out);

std::string format_double(double value);

// Comma-separated rows; blank lines and lines starting with '#' are skipped.
// The first remaining row is the header.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Throws DataError if the column is missing.
  std::size_t column(const std::string& name) const;
};

Table read(std::istream& in);
Table read_file(const std::string& path);

double to_double(const std::string& field);
long long to_int(const std::string& field);

}  // namespace depthpack::csv
