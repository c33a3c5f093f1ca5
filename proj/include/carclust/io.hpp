#ifndef CARCLUST_IO_HPP
#define CARCLUST_IO_HPP

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "errors.hpp"
#include "panel.hpp"

/**
 * @file io.hpp
 * @brief Long-format CSV panels (`unit,time,<var1>,...,<varJ>`, one row per unit and time)
 * and min-max normalization.
 */

namespace carclust {

enum class PanelFormat { LongCsv };

namespace csv {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

/// Splits one record; fields may be double-quoted with `""` as an escaped quote.
inline std::vector<std::string> split(std::string_view line, const std::string& source, std::size_t line_no) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    bool was_quoted = false;
    for (std::size_t k = 0; k < line.size(); ++k) {
        const char c = line[k];
        if (quoted) {
            if (c == '"') {
                if (k + 1 < line.size() && line[k + 1] == '"') {
                    cur += '"';
                    ++k;
                } else {
                    quoted = false;
                }
            } else {
                cur += c;
            }
        } else if (c == '"' && trim(cur).empty()) {
            quoted = true;
            was_quoted = true;
            cur.clear();
        } else if (c == ',') {
            fields.push_back(was_quoted ? cur : std::string(trim(cur)));
            cur.clear();
            was_quoted = false;
        } else {
            cur += c;
        }
    }
    if (quoted) {
        throw ParseError(source, line_no, "unterminated quoted field");
    }
    fields.push_back(was_quoted ? cur : std::string(trim(cur)));
    return fields;
}

inline std::string quote(const std::string& field) {
    if (field.find_first_of(",\"\n\r") == std::string::npos && trim(field) == field) {
        return field;
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out += '"';
        }
        out += c;
    }
    return out + '"';
}

/// Shortest representation that parses back to the same double.
inline std::string format_exact(double v) {
    std::array<char, 64> buf{};
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
}

}

/**
 * Reads a long-format panel. Units keep their order of first appearance; times are sorted
 * (numerically when every label is a number). Every unit must be observed at every time.
 */
inline LongitudinalPanel parse_panel(std::istream& in, const std::string& source = "<input>") {
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    while (std::getline(in, line)) {
        ++line_no;
        if (!csv::trim(line).empty()) {
            header = csv::split(line, source, line_no);
            break;
        }
    }
    if (header.empty()) {
        throw ParseError(source, line_no, "missing header row");
    }
    if (header.size() < 3 || header[0] != "unit" || header[1] != "time") {
        throw ParseError(source, line_no, "header must be 'unit,time,<var1>,...'");
    }
    const std::vector<std::string> vars(header.begin() + 2, header.end());
    const std::size_t J = vars.size();

    std::vector<std::string> unit_order;
    std::unordered_map<std::string, std::size_t> unit_index;
    std::map<std::string, std::size_t> time_seen;
    struct Row {
        std::size_t unit;
        std::string time;
        std::vector<double> values;
        std::size_t line;
    };
    std::vector<Row> rows;

    while (std::getline(in, line)) {
        ++line_no;
        if (csv::trim(line).empty()) {
            continue;
        }
        auto fields = csv::split(line, source, line_no);
        if (fields.size() != J + 2) {
            throw ParseError(source, line_no, "expected " + std::to_string(J + 2) + " fields, got " + std::to_string(fields.size()));
        }
        if (fields[0].empty()) {
            throw ParseError(source, line_no, "empty unit id");
        }
        if (fields[1].empty()) {
            throw ParseError(source, line_no, "empty time label");
        }
        Row row{0, fields[1], std::vector<double>(J), line_no};
        for (std::size_t j = 0; j < J; ++j) {
            const auto text = csv::trim(fields[j + 2]);
            if (text.empty()) {
                throw ParseError(source, line_no, "missing value for variable '" + vars[j] + "'");
            }
            if (!detail::parse_number(text, row.values[j]) || !std::isfinite(row.values[j])) {
                throw ParseError(source, line_no, "invalid number '" + std::string(text) + "' for variable '" + vars[j] + "'");
            }
        }
        auto [it, inserted] = unit_index.try_emplace(fields[0], unit_order.size());
        if (inserted) {
            unit_order.push_back(fields[0]);
        }
        row.unit = it->second;
        time_seen.try_emplace(fields[1], 0);
        rows.push_back(std::move(row));
    }

    std::vector<std::string> times;
    for (const auto& [label, unused] : time_seen) {
        times.push_back(label);
    }
    std::stable_sort(times.begin(), times.end(), time_label_less);
    std::unordered_map<std::string, std::size_t> time_index;
    for (std::size_t t = 0; t < times.size(); ++t) {
        time_index[times[t]] = t;
    }

    const std::size_t n = unit_order.size();
    const std::size_t T = times.size();
    std::vector<Matrix> slices(T, Matrix::Zero(static_cast<Index>(n), static_cast<Index>(J)));
    std::vector<std::size_t> filled(n * T, 0);
    for (const auto& row : rows) {
        const std::size_t t = time_index.at(row.time);
        auto& cell = filled[row.unit * T + t];
        if (cell != 0) {
            throw DuplicateRow(source, row.line, unit_order[row.unit], row.time);
        }
        cell = row.line;
        for (std::size_t j = 0; j < J; ++j) {
            slices[t](static_cast<Index>(row.unit), static_cast<Index>(j)) = row.values[j];
        }
    }

    std::vector<std::pair<std::string, std::string>> missing;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t t = 0; t < T; ++t) {
            if (filled[i * T + t] == 0) {
                missing.emplace_back(unit_order[i], times[t]);
            }
        }
    }
    if (!missing.empty()) {
        std::string msg = source + ": incomplete panel, " + std::to_string(missing.size()) + " missing (unit, time) cell(s):";
        for (std::size_t k = 0; k < std::min<std::size_t>(missing.size(), 10); ++k) {
            msg += " (" + missing[k].first + ", " + missing[k].second + ")";
        }
        if (missing.size() > 10) {
            msg += " ...";
        }
        throw IncompletePanel(msg, missing.front().first, missing.front().second);
    }

    try {
        return LongitudinalPanel(std::move(slices), std::move(unit_order), vars, std::move(times));
    } catch (const InvalidPanel& e) {
        throw InvalidPanel(source + ": " + e.what());
    }
}

inline LongitudinalPanel load_panel(const std::string& path, PanelFormat format = PanelFormat::LongCsv) {
    (void)format;
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open '" + path + "' for reading");
    }
    return parse_panel(in, path);
}

/// Writes every value with the shortest round-trip representation, unit-major.
inline void write_panel(const LongitudinalPanel& panel, std::ostream& out) {
    out << "unit,time";
    for (const auto& v : panel.var_names()) {
        out << ',' << csv::quote(v);
    }
    out << '\n';
    for (Index i = 0; i < panel.units(); ++i) {
        for (Index t = 0; t < panel.times(); ++t) {
            out << csv::quote(panel.unit_ids()[static_cast<std::size_t>(i)]) << ','
                << csv::quote(panel.time_labels()[static_cast<std::size_t>(t)]);
            for (Index j = 0; j < panel.vars(); ++j) {
                out << ',' << csv::format_exact(panel.value(i, j, t));
            }
            out << '\n';
        }
    }
}

inline void write_panel(const LongitudinalPanel& panel, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    write_panel(panel, out);
    if (!out) {
        throw IoError("failed writing '" + path + "'");
    }
}

/**
 * Maps every variable onto [0, 1] with `(x - min) / (max - min)`, extrema over all units and times.
 */
inline LongitudinalPanel minmax_normalize(const LongitudinalPanel& panel) {
    const Index J = panel.vars();
    RowVector lo = panel.slice(0).colwise().minCoeff();
    RowVector hi = panel.slice(0).colwise().maxCoeff();
    for (const auto& x : panel.slices()) {
        lo = lo.cwiseMin(x.colwise().minCoeff());
        hi = hi.cwiseMax(x.colwise().maxCoeff());
    }
    for (Index j = 0; j < J; ++j) {
        if (!(hi(j) > lo(j))) {
            throw ConstantVariable(static_cast<std::size_t>(j), panel.var_names()[static_cast<std::size_t>(j)]);
        }
    }

    std::vector<Matrix> scaled;
    scaled.reserve(static_cast<std::size_t>(panel.times()));
    for (const auto& x : panel.slices()) {
        Matrix y(x.rows(), J);
        for (Index j = 0; j < J; ++j) {
            y.col(j) = ((x.col(j).array() - lo(j)) / (hi(j) - lo(j))).matrix();
        }
        scaled.push_back(std::move(y));
    }
    return LongitudinalPanel(std::move(scaled), panel.unit_ids(), panel.var_names(), panel.time_labels());
}

}

#endif
