#pragma once

// CSV and file output: header row, fixed columns, LF endings, shortest
// round-trip number formatting, atomic replacement of the target file.

#include <charconv>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <unistd.h>

#include "../errors.hpp"
#include "../field_core.hpp"

namespace foliflow::io {

/// Shortest representation that parses back to the same double; "nan" for NaN.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (v == 0.0) return "0";  // folds -0
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

/// Writes `content` to a sibling temporary file, then renames it over `path`.
inline void write_atomic(const std::filesystem::path& path, std::string_view content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw Error("write to " + tmp.string() + " failed");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw Error("cannot move output into place at " + path.string() + ": " + ec.message());
    }
}

class CsvWriter {
public:
    explicit CsvWriter(std::vector<std::string> columns) : width_(columns.size()) {
        row_strings(columns);
    }

    template <class... T>
    void row(const T&... cells) {
        static_assert(sizeof...(T) > 0);
        if (sizeof...(T) != width_) throw Error("csv row width does not match the header");
        std::size_t k = 0;
        ((out_ += (k++ ? "," : ""), out_ += cell(cells)), ...);
        out_ += '\n';
    }

    const std::string& str() const { return out_; }
    void save(const std::filesystem::path& path) const { write_atomic(path, out_); }

    /// Angle cell: the (-pi, pi] representative.
    struct Angle {
        double value;
    };

private:
    std::size_t width_;
    std::string out_;

    void row_strings(const std::vector<std::string>& cells) {
        for (std::size_t k = 0; k < cells.size(); ++k) {
            if (k) out_ += ',';
            out_ += cells[k];
        }
        out_ += '\n';
    }
    static std::string cell(double v) { return format_number(v); }
    static std::string cell(Angle a) { return format_number(std::isnan(a.value) ? a.value : wrap_angle(a.value)); }
    static std::string cell(const std::string& s) { return s; }
    static std::string cell(const char* s) { return s; }
    template <class I>
        requires std::is_integral_v<I>
    static std::string cell(I v) {
        return std::to_string(v);
    }
};

// ---------------------------------------------------------------------------
// Reading
// ---------------------------------------------------------------------------

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    /// Column index by name, or -1.
    long column(std::string_view name) const {
        for (std::size_t k = 0; k < header.size(); ++k)
            if (header[k] == name) return static_cast<long>(k);
        return -1;
    }
};

/// Numeric CSV with a header row. `source` names the input in messages, which
/// carry the 1-based line number of the bad row.
inline CsvTable parse_csv(const std::string& text, const std::string& source = "input") {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    auto split = [](const std::string& l) {
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true) {
            const auto comma = l.find(',', start);
            cells.push_back(l.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        return cells;
    };
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (lineno == 1) {
            if (line.empty()) throw ConfigError(source + ":1: missing header row");
            t.header = split(line);
            continue;
        }
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() != t.header.size())
            throw ConfigError(source + ":" + std::to_string(lineno) + ": expected " +
                              std::to_string(t.header.size()) + " fields, found " +
                              std::to_string(cells.size()));
        std::vector<double> row(cells.size());
        for (std::size_t k = 0; k < cells.size(); ++k) {
            const std::string& c = cells[k];
            if (c == "nan") {
                row[k] = std::nan("");
                continue;
            }
            const auto res = std::from_chars(c.data(), c.data() + c.size(), row[k]);
            if (res.ec != std::errc{} || res.ptr != c.data() + c.size())
                throw ConfigError(source + ":" + std::to_string(lineno) + ": field '" + t.header[k] +
                                  "' is not a number: '" + c + "'");
        }
        t.rows.push_back(std::move(row));
    }
    if (lineno == 0) throw ConfigError(source + ":1: empty file");
    return t;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace foliflow::io
