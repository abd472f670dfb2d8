#include "scn/csv.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <system_error>

#include "scn/types.hpp"

namespace scn {

std::string format_double(double x)
{
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    if (ec != std::errc())
        throw std::runtime_error("format_double: conversion failed");
    return std::string(buf, ptr);
}

double parse_double(std::string_view s)
{
    double x = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
    if (ec != std::errc() || ptr != s.data() + s.size())
        throw std::runtime_error("not a number: '" + std::string(s) + "'");
    return x;
}

int CsvTable::column(std::string_view name) const
{
    for (std::size_t i = 0; i < columns.size(); ++i)
        if (columns[i] == name)
            return static_cast<int>(i);
    return -1;
}

std::vector<double> CsvTable::column_values(std::string_view name) const
{
    const int c = column(name);
    if (c < 0)
        throw std::runtime_error("csv: no column named '" + std::string(name) + "'");
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows)
        out.push_back(r[static_cast<std::size_t>(c)]);
    return out;
}

void write_csv(std::ostream& os, const CsvTable& table)
{
    if (!table.schema.empty())
        os << "# " << table.schema << '\n';
    for (std::size_t i = 0; i < table.columns.size(); ++i)
        os << (i ? "," : "") << table.columns[i];
    os << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            os << (i ? "," : "") << format_double(row[i]);
        os << '\n';
    }
}

void write_csv(const std::string& path, const CsvTable& table)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw std::runtime_error("cannot open '" + path + "' for writing");
    write_csv(os, table);
}

namespace {

std::vector<std::string> split(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ','))
        out.push_back(cell);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

}  // namespace

void write_csv(std::ostream& os, const TextTable& table)
{
    const auto check = [](const std::string& cell) {
        if (cell.find_first_of(",\n\r") != std::string::npos)
            throw std::runtime_error("csv: cell contains a separator: '" + cell + "'");
    };
    if (!table.schema.empty())
        os << "# " << table.schema << '\n';
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
        check(table.columns[i]);
        os << (i ? "," : "") << table.columns[i];
    }
    os << '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            check(row[i]);
            os << (i ? "," : "") << row[i];
        }
        os << '\n';
    }
}

void write_csv(const std::string& path, const TextTable& table)
{
    std::ofstream os(path, std::ios::binary);
    if (!os)
        throw std::runtime_error("cannot open '" + path + "' for writing");
    write_csv(os, table);
}

TextTable read_text_csv(std::istream& is)
{
    TextTable t;
    std::string line;
    bool have_header = false;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        if (line[0] == '#') {
            if (t.schema.empty() && !have_header)
                t.schema = line.size() > 2 ? line.substr(2) : "";
            continue;
        }
        if (!have_header) {
            t.columns = split(line);
            have_header = true;
        } else {
            t.rows.push_back(split(line));
        }
    }
    if (!have_header)
        throw std::runtime_error("csv: missing header row");
    return t;
}

CsvTable read_csv(std::istream& is)
{
    CsvTable t;
    std::string line;
    bool have_header = false;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty())
            continue;
        if (line[0] == '#') {
            if (t.schema.empty() && !have_header)
                t.schema = line.size() > 2 ? line.substr(2) : "";
            continue;
        }
        auto cells = split(line);
        if (!have_header) {
            t.columns = std::move(cells);
            have_header = true;
            continue;
        }
        if (cells.size() != t.columns.size())
            throw std::runtime_error("csv line " + std::to_string(lineno) + ": expected "
                                     + std::to_string(t.columns.size()) + " fields, got "
                                     + std::to_string(cells.size()));
        std::vector<double> row;
        row.reserve(cells.size());
        for (const auto& c : cells)
            row.push_back(parse_double(c));
        t.rows.push_back(std::move(row));
    }
    if (!have_header)
        throw std::runtime_error("csv: missing header row");
    return t;
}

CsvTable read_csv(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw MissingArtifactError("cannot open '" + path + "'");
    return read_csv(is);
}

TextTable read_text_csv(const std::string& path)
{
    std::ifstream is(path, std::ios::binary);
    if (!is)
        throw MissingArtifactError("cannot open '" + path + "'");
    return read_text_csv(is);
}

}  // namespace scn
