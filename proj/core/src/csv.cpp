#include "curemc3/csv.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>

#include "curemc3/errors.hpp"

namespace curemc3 {

namespace {

std::string_view trim(std::string_view s) noexcept
{
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
        s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

/// Reads one logical record (quoted fields may span lines). False at EOF.
bool read_record(std::istream& in, std::vector<std::string>& cells, std::size_t& line_no)
{
    cells.clear();
    std::string line;
    if (!std::getline(in, line))
        return false;
    ++line_no;
    std::string cell;
    bool quoted = false;
    bool was_quoted = false;
    std::size_t i = 0;
    for (;;) {
        if (i >= line.size()) {
            if (quoted) {
                if (!std::getline(in, line))
                    throw ParseError("unterminated quoted field starting near line " +
                                     std::to_string(line_no));
                ++line_no;
                cell.push_back('\n');
                i = 0;
                continue;
            }
            break;
        }
        const char ch = line[i++];
        if (quoted) {
            if (ch == '"') {
                if (i < line.size() && line[i] == '"') {
                    cell.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell.push_back(ch);
            }
        } else if (ch == '"') {
            quoted = true;
            was_quoted = true;
        } else if (ch == ',') {
            cells.push_back(was_quoted ? cell : std::string(trim(cell)));
            cell.clear();
            was_quoted = false;
        } else {
            cell.push_back(ch);
        }
    }
    cells.push_back(was_quoted ? cell : std::string(trim(cell)));
    return true;
}

bool blank(const std::vector<std::string>& cells) noexcept
{
    return cells.size() == 1 && cells[0].empty();
}

}  // namespace

std::optional<std::size_t> CsvTable::find_column(std::string_view name) const
{
    for (std::size_t j = 0; j < header.size(); ++j) {
        if (header[j] == name)
            return j;
    }
    return std::nullopt;
}

std::size_t CsvTable::column(std::string_view name) const
{
    if (const auto j = find_column(name))
        return *j;
    throw ConfigError("column '" + std::string(name) + "' not found in the input header");
}

CsvTable read_csv(std::istream& in)
{
    CsvTable table;
    std::size_t line_no = 0;
    std::vector<std::string> cells;
    while (read_record(in, cells, line_no)) {
        if (!blank(cells))
            break;
    }
    if (cells.empty() || blank(cells))
        throw ParseError("input has no header row");
    if (!cells[0].empty() && cells[0].rfind("\xEF\xBB\xBF", 0) == 0)
        cells[0].erase(0, 3);
    table.header = cells;
    while (read_record(in, cells, line_no)) {
        if (blank(cells))
            continue;
        if (cells.size() != table.header.size())
            throw ParseError("line " + std::to_string(line_no) + ": expected " +
                                 std::to_string(table.header.size()) + " fields, found " +
                                 std::to_string(cells.size()),
                             table.rows.size() + 1, "");
        table.rows.push_back(cells);
    }
    return table;
}

CsvTable read_csv_file(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open '" + path + "'");
    return read_csv(in);
}

bool is_missing(std::string_view cell) noexcept
{
    cell = trim(cell);
    return cell.empty() || cell == "NA" || cell == "NaN" || cell == "nan" || cell == "." ||
           cell == "null";
}

std::optional<double> parse_number(std::string_view cell) noexcept
{
    cell = trim(cell);
    if (!cell.empty() && cell.front() == '+')
        cell.remove_prefix(1);
    if (cell.empty())
        return std::nullopt;
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
    if (ec != std::errc() || ptr != cell.data() + cell.size())
        return std::nullopt;
    return v;
}

std::string format_double(double value)
{
    char buf[32];
    const int len = std::snprintf(buf, sizeof buf, "%.17g", value);
    return std::string(buf, static_cast<std::size_t>(len));
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& cells)
{
    for (std::size_t j = 0; j < cells.size(); ++j) {
        if (j > 0)
            out << ',';
        const std::string& c = cells[j];
        if (c.find_first_of(",\"\n\r") == std::string::npos) {
            out << c;
            continue;
        }
        out << '"';
        for (char ch : c) {
            if (ch == '"')
                out << '"';
            out << ch;
        }
        out << '"';
    }
    out << '\n';
}

}  // namespace curemc3
