#pragma once

#include <string>
#include <vector>

namespace dclogit::csv {

// Minimal CSV support: comma separator, optional double quotes around fields,
// "" escapes a quote inside a quoted field. No embedded newlines.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Column index by name, -1 if absent.
    int column(const std::string& name) const;
};

Table read_file(const std::string& path);
Table parse(const std::string& text, const std::string& origin);

void write_file(const std::string& path, const Table& table);

// Shortest representation that round-trips the double exactly.
std::string format_double(double v);

} // namespace dclogit::csv
