#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace scn {

/// Shortest representation that parses back to the same double.
std::string format_double(double x);
double parse_double(std::string_view s);

/// Table with a named header and numeric rows. Lines starting with '#' are
/// comments; the first comment line carries the schema tag.
struct CsvTable {
    std::string schema;
    std::vector<std::string> columns;
    std::vector<std::vector<double>> rows;

    int column(std::string_view name) const;  // -1 when absent
    std::vector<double> column_values(std::string_view name) const;
};

/// Table whose cells are arbitrary text without commas or newlines, used for
/// summaries that mix labels and numbers.
struct TextTable {
    std::string schema;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
};

void write_csv(std::ostream& os, const CsvTable& table);
void write_csv(std::ostream& os, const TextTable& table);
void write_csv(const std::string& path, const TextTable& table);
TextTable read_text_csv(std::istream& is);
TextTable read_text_csv(const std::string& path);
void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(std::istream& is);
CsvTable read_csv(const std::string& path);

}  // namespace scn
