#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include "smcvar/finite.hpp"

namespace smcvar {

inline constexpr const char* kVersion = "1.0.0";

// Locale-independent decimal rendering, 17 significant digits.
inline std::string format_number(double v) {
    if (std::isnan(v)) throw ValidationError("report: NaN is not writable");
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    void check() const {
        for (const auto& row : rows) {
            if (row.size() != header.size())
                throw ValidationError("report: row width does not match header");
            for (double v : row)
                if (std::isnan(v)) throw ValidationError("report: NaN is not writable");
        }
    }
};

inline std::string render_csv(const CsvTable& table) {
    table.check();
    std::string out;
    for (std::size_t i = 0; i < table.header.size(); ++i) {
        if (i) out += ',';
        out += table.header[i];
    }
    out += '\n';
    for (const auto& row : table.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            if (i) out += ',';
            out += format_number(row[i]);
        }
        out += '\n';
    }
    return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("report: cannot open " + path + " for writing");
    f << content;
    if (!f) throw std::runtime_error("report: write to " + path + " failed");
}

inline void write_csv(const std::string& path, const CsvTable& table) {
    write_text_file(path, render_csv(table));
}

} // namespace smcvar
