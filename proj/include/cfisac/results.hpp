// Copyright 2026 The cfisac Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace cfisac {

inline constexpr const char* kVersionTag = "cfisac 0.1.0";

enum class ColumnType { real, integer, text };

struct Column {
    std::string name;
    ColumnType type = ColumnType::real;
};

using Cell = std::variant<double, std::int64_t, std::string>;

/// Named, typed columns plus a metadata tree (resolved configuration, seed,
/// version tag).
struct ResultTable {
    std::vector<Column> columns;
    std::vector<std::vector<Cell>> rows;
    nlohmann::json metadata = nlohmann::json::object();

    std::size_t column_index(const std::string& name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i].name == name) return i;
        throw std::out_of_range("ResultTable: no column '" + name + "'");
    }

    void add_row(std::vector<Cell> row) {
        if (row.size() != columns.size())
            throw std::invalid_argument("ResultTable: row has " + std::to_string(row.size()) + " cells, expected " +
                                        std::to_string(columns.size()));
        for (std::size_t i = 0; i < row.size(); ++i) {
            const auto want = static_cast<std::size_t>(columns[i].type);
            if (row[i].index() != want)
                throw std::invalid_argument("ResultTable: cell type mismatch in column '" + columns[i].name + "'");
        }
        rows.push_back(std::move(row));
    }

    double real(std::size_t row, const std::string& col) const {
        return std::get<double>(rows.at(row).at(column_index(col)));
    }
    std::int64_t integer(std::size_t row, const std::string& col) const {
        return std::get<std::int64_t>(rows.at(row).at(column_index(col)));
    }
    const std::string& text(std::size_t row, const std::string& col) const {
        return std::get<std::string>(rows.at(row).at(column_index(col)));
    }
};

inline const char* to_string(ColumnType t) {
    switch (t) {
    case ColumnType::real: return "real";
    case ColumnType::integer: return "integer";
    case ColumnType::text: return "text";
    }
    return "?";
}

/// 17 significant digits, '.' separator, independent of the global locale.
inline std::string format_real(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, r.ptr);
}

namespace detail {

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

inline std::string cell_text(const Cell& c) {
    if (auto d = std::get_if<double>(&c)) return format_real(*d);
    if (auto i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
    return std::get<std::string>(c);
}

} // namespace detail

/// CSV layout: one "# " line carrying the metadata as compact JSON, a header
/// row, then one record per row. LF line endings throughout.
inline void write_csv(std::ostream& os, const ResultTable& t) {
    os << "# " << t.metadata.dump() << '\n';
    for (std::size_t i = 0; i < t.columns.size(); ++i) os << (i ? "," : "") << detail::csv_field(t.columns[i].name);
    os << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) os << (i ? "," : "") << detail::csv_field(detail::cell_text(row[i]));
        os << '\n';
    }
}

inline nlohmann::json to_json_tree(const ResultTable& t) {
    nlohmann::json cols = nlohmann::json::array();
    for (const auto& c : t.columns) cols.push_back({{"name", c.name}, {"type", to_string(c.type)}});
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : t.rows) {
        nlohmann::json r = nlohmann::json::array();
        for (const auto& c : row) std::visit([&](const auto& v) { r.push_back(v); }, c);
        rows.push_back(std::move(r));
    }
    return {{"metadata", t.metadata}, {"columns", cols}, {"rows", rows}};
}

inline void write_json(std::ostream& os, const ResultTable& t) { os << to_json_tree(t).dump(2) << '\n'; }

namespace detail {

template <class Writer>
void emit_file(const ResultTable& t, const std::string& path, Writer w) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    w(os, t);
    os.flush();
    if (!os) throw std::runtime_error("write to '" + path + "' failed");
}

} // namespace detail

inline void emit_csv(const ResultTable& t, const std::string& path) {
    detail::emit_file(t, path, [](std::ostream& os, const ResultTable& tb) { write_csv(os, tb); });
}

inline void emit_json(const ResultTable& t, const std::string& path) {
    detail::emit_file(t, path, [](std::ostream& os, const ResultTable& tb) { write_json(os, tb); });
}

/// Parsed form of a CSV written by write_csv; cells stay as text.
struct CsvDocument {
    nlohmann::json metadata;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

inline CsvDocument read_csv(std::istream& is) {
    CsvDocument doc;
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::string cur;
        bool quoted = false;
        for (std::size_t i = 0; i < s.size(); ++i) {
            const char c = s[i];
            if (quoted) {
                if (c == '"' && i + 1 < s.size() && s[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else if (c == '"') {
                    quoted = false;
                } else {
                    cur += c;
                }
            } else if (c == '"') {
                quoted = true;
            } else if (c == ',') {
                out.push_back(std::move(cur));
                cur.clear();
            } else {
                cur += c;
            }
        }
        out.push_back(std::move(cur));
        return out;
    };
    bool have_header = false;
    while (std::getline(is, line)) {
        if (!have_header && line.rfind("# ", 0) == 0) {
            doc.metadata = nlohmann::json::parse(line.substr(2));
            continue;
        }
        if (!have_header) {
            doc.header = split(line);
            have_header = true;
            continue;
        }
        auto row = split(line);
        if (row.size() != doc.header.size()) throw std::runtime_error("read_csv: ragged row");
        doc.rows.push_back(std::move(row));
    }
    if (!have_header) throw std::runtime_error("read_csv: missing header row");
    return doc;
}

} // namespace cfisac
