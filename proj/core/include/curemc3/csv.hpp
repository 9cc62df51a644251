#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace curemc3 {

/// A header row plus string cells. Quoted fields ("a,b", "" escapes) are
/// supported; blank lines are skipped.
struct CsvTable
{
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::optional<std::size_t> find_column(std::string_view name) const;
    /// Throws ConfigError naming the missing column.
    std::size_t column(std::string_view name) const;
};

CsvTable read_csv(std::istream& in);
/// Throws DataError if the file cannot be opened.
CsvTable read_csv_file(const std::string& path);

/// "", "NA", "NaN", "nan", "." and "null".
bool is_missing(std::string_view cell) noexcept;

/// Strict full-string parse; nullopt on failure.
std::optional<double> parse_number(std::string_view cell) noexcept;

/// Round-trippable text with 17 significant digits.
std::string format_double(double value);

/// Writes one CSV line, quoting cells that need it.
void write_csv_row(std::ostream& out, const std::vector<std::string>& cells);

}  // namespace curemc3
