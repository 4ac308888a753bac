#pragma once
// Minimal CSV reading/writing.  All emitted CSVs use fixed header rows and
// deterministic number formatting so reruns are byte-identical.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hvacft/errors.hpp"

namespace hvacft::csv {

// Formats a double with round-trip precision ("%.17g") trimmed of noise:
// integers print without exponent clutter, e.g. 2 -> "2".
inline std::string num(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    // prefer the shortest representation that round-trips
    for (int prec = 1; prec < 17; ++prec) {
        char shorter[40];
        std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
        if (std::strtod(shorter, nullptr) == v) return shorter;
    }
    return buf;
}

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

// Reads a CSV with a mandatory header row.  Throws InputError naming the file
// and 1-based line number on any structural problem.
inline Table read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open CSV file: " + path);
    Table t;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = split_line(line);
        if (lineno == 1) {
            t.header = cells;
            continue;
        }
        if (cells.size() != t.header.size())
            throw InputError(path + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(t.header.size()) + " columns, got " +
                             std::to_string(cells.size()));
        t.rows.push_back(std::move(cells));
    }
    if (t.header.empty()) throw InputError(path + ": empty CSV (missing header)");
    return t;
}

inline double to_double(const std::string& cell, const std::string& where) {
    char* end = nullptr;
    double v = std::strtod(cell.c_str(), &end);
    if (end == cell.c_str() || *end != '\0')
        throw InputError(where + ": not a number: '" + cell + "'");
    return v;
}

class Writer {
public:
    explicit Writer(const std::string& path) : out_(path), path_(path) {
        if (!out_) throw InputError("cannot open CSV file for writing: " + path);
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }
    const std::string& path() const { return path_; }

private:
    std::ofstream out_;
    std::string path_;
};

}  // namespace hvacft::csv
