// Result tables, CSV rendering and atomic file output.
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "qbd/core.hpp"

namespace qbd {

using Cell = std::variant<double, std::int64_t, std::string>;

/// %.17g, with fixed spellings for the non-finite values.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// Quote a CSV field only when it needs it.
inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

struct Table {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<Cell>> rows;

    Table() = default;
    Table(std::string n, std::vector<std::string> cols) : name(std::move(n)), columns(std::move(cols)) {}

    void add(std::vector<Cell> row) {
        if (row.size() != columns.size())
            throw std::logic_error("table " + name + ": row has " + std::to_string(row.size()) + " cells, expected " +
                                   std::to_string(columns.size()));
        rows.push_back(std::move(row));
    }

    std::string csv() const {
        std::string out;
        for (std::size_t i = 0; i < columns.size(); ++i) out += (i ? "," : "") + csv_field(columns[i]);
        out += '\n';
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) {
                if (i) out += ',';
                if (const auto* d = std::get_if<double>(&r[i]))
                    out += format_double(*d);
                else if (const auto* k = std::get_if<std::int64_t>(&r[i]))
                    out += std::to_string(*k);
                else
                    out += csv_field(std::get<std::string>(r[i]));
            }
            out += '\n';
        }
        return out;
    }
};

/// Write via a sibling temp file and rename, so readers never see a partial file.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        os.write(content.data(), static_cast<std::streamsize>(content.size()));
        os.flush();
        if (!os) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("cannot read " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace qbd
