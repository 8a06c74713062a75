#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace polopt::csv {

using Row = std::vector<std::string>;

// RFC 4180 reader: quoted fields may contain commas, doubled quotes and
// newlines. A trailing '\r' on each record is dropped. Blank lines are skipped.
std::vector<Row> read(std::istream& in);

std::string escape(std::string_view field);
void write_row(std::ostream& out, const Row& row);

// Shortest decimal text that round-trips the double exactly.
std::string format_number(double v);

}  // namespace polopt::csv
