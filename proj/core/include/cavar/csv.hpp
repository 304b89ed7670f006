#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace cavar::csv {

/// Plain comma-separated table: no quoting, `.` decimal separator.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column index by exact (case-insensitive) name, or -1.
    int column(std::string_view name) const;
};

std::vector<std::string> split_line(std::string_view line);
Table read(std::istream& in);
Table read_file(const std::string& path);

double parse_double(std::string_view text);
long long parse_int(std::string_view text);

/// Shortest round-trip representation; identical across runs.
std::string format_double(double value);

void write_row(std::ostream& out, const std::vector<std::string>& cells);

}  // namespace cavar::csv
