#include "cavar/csv.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

#include "cavar/error.hpp"

namespace cavar::csv {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
}

}  // namespace

int Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (iequals(header[i], name)) return static_cast<int>(i);
    }
    return -1;
}

std::vector<std::string> split_line(std::string_view line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        const std::string_view cell = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
        cells.emplace_back(trim(cell));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

Table read(std::istream& in) {
    Table table;
    std::string line;
    bool have_header = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!have_header) {
            // Strip a UTF-8 byte-order mark.
            if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
            if (trim(line).empty()) continue;
            table.header = split_line(line);
            have_header = true;
            continue;
        }
        if (trim(line).empty()) continue;
        table.rows.push_back(split_line(line));
    }
    if (!have_header) {
        fail(ErrorCode::ParseError, "csv: missing header line");
    }
    return table;
}

Table read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        fail(ErrorCode::Io, "cannot open " + path);
    }
    return read(in);
}

double parse_double(std::string_view text) {
    text = trim(text);
    double value = 0.0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    if (!text.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last) {
        fail(ErrorCode::ParseError, "not a number: '" + std::string(text) + "'");
    }
    return value;
}

long long parse_int(std::string_view text) {
    text = trim(text);
    long long value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        fail(ErrorCode::ParseError, "not an integer: '" + std::string(text) + "'");
    }
    return value;
}

std::string format_double(double value) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
    return std::string(buf, ec == std::errc() ? ptr : buf);
}

void write_row(std::ostream& out, const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (i) out << ',';
        out << cells[i];
    }
    out << '\n';
}

}  // namespace cavar::csv
