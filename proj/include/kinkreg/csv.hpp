#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "kinkreg/errors.hpp"

namespace kinkreg {

// Round-trip exact text for a 64-bit double.
inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct CsvFile {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> data; // column-oriented
    std::size_t rows = 0;

    std::size_t column_index(const std::string& name) const {
        for (std::size_t c = 0; c < columns.size(); ++c)
            if (columns[c] == name) return c;
        throw io_error("missing column '" + name + "'", 0, name);
    }
};

namespace detail {

inline void split_line(const std::string& line, char delim, std::vector<std::string>& out) {
    out.clear();
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(delim, start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

inline std::string trim(std::string s) {
    while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.pop_back();
    std::size_t i = 0;
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    return s.substr(i);
}

} // namespace detail

// Strict numeric CSV with a header row: every cell must parse to a finite
// double. Errors carry the 1-based data row and the column name.
inline CsvFile read_numeric_csv(const std::string& path, char delim = ',') {
    std::ifstream in(path);
    if (!in) throw io_error("cannot open file '" + path + "'");
    CsvFile out;
    std::string line;
    if (!std::getline(in, line)) throw io_error("empty file '" + path + "'");
    if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF &&
        static_cast<unsigned char>(line[1]) == 0xBB && static_cast<unsigned char>(line[2]) == 0xBF)
        line.erase(0, 3);
    std::vector<std::string> cells;
    detail::split_line(line, delim, cells);
    for (auto& c : cells) out.columns.push_back(detail::trim(c));
    out.data.assign(out.columns.size(), {});

    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        ++row;
        detail::split_line(line, delim, cells);
        if (cells.size() != out.columns.size())
            throw io_error("row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                               " cells, expected " + std::to_string(out.columns.size()),
                           row);
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const std::string tok = detail::trim(cells[c]);
            double v = 0;
            const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size() || !std::isfinite(v))
                throw io_error("unusable cell '" + tok + "' at row " + std::to_string(row) +
                                   ", column '" + out.columns[c] + "'",
                               row, out.columns[c]);
            out.data[c].push_back(v);
        }
    }
    out.rows = row;
    return out;
}

} // namespace kinkreg
