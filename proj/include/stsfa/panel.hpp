#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "stsfa/csv.hpp"
#include "stsfa/errors.hpp"

namespace stsfa {

/// Balanced N x T panel with one output and P input columns. The first input
/// column is an all-ones intercept when the loading schema asked for one.
/// Unit order is first appearance in the source and is the canonical order
/// any spatial weight matrix must follow. Immutable by convention after
/// construction.
struct PanelDataset {
    std::vector<std::string> unit_ids;     // N
    std::vector<std::string> time_ids;     // T, ascending
    std::vector<std::string> column_names; // P
    Eigen::MatrixXd y;                     // N x T
    std::vector<Eigen::MatrixXd> x;        // P matrices, each N x T

    int n_units() const { return static_cast<int>(unit_ids.size()); }
    int n_periods() const { return static_cast<int>(time_ids.size()); }
    int n_inputs() const { return static_cast<int>(x.size()); }
};

struct PanelCell {
    std::string unit, time;
    bool operator==(const PanelCell&) const = default;
};

struct BalanceReport {
    long n_units = 0;
    long n_periods = 0;
    std::vector<PanelCell> missing_cells;
    std::vector<PanelCell> duplicate_cells;

    bool balanced() const { return missing_cells.empty() && duplicate_cells.empty(); }
};

struct PanelSchema {
    std::string unit_col, time_col, y_col;
    std::vector<std::string> x_cols;
    bool intercept = true;
};

namespace detail {

inline bool all_numeric(const std::vector<std::string>& labels) {
    double v;
    return std::all_of(labels.begin(), labels.end(),
                       [&](const std::string& s) { return try_parse_double(s, v) && std::isfinite(v); });
}

/// Ascending label order: numeric when every label parses as a finite number,
/// lexicographic otherwise.
inline std::vector<std::string> sorted_time_labels(std::vector<std::string> labels) {
    if (all_numeric(labels)) {
        std::sort(labels.begin(), labels.end(), [](const std::string& a, const std::string& b) {
            double va, vb;
            try_parse_double(a, va);
            try_parse_double(b, vb);
            return va < vb;
        });
    } else {
        std::sort(labels.begin(), labels.end());
    }
    return labels;
}

} // namespace detail

/// Exhaustive list of missing and duplicated (unit, time) cells in a raw row
/// set. Report-only: never throws.
inline BalanceReport validate_balance(const std::vector<PanelCell>& rows) {
    BalanceReport report;
    std::vector<std::string> units, times;
    std::map<std::pair<std::string, std::string>, int> counts;
    for (const auto& r : rows) {
        if (std::find(units.begin(), units.end(), r.unit) == units.end()) units.push_back(r.unit);
        if (std::find(times.begin(), times.end(), r.time) == times.end()) times.push_back(r.time);
        ++counts[{r.unit, r.time}];
    }
    times = detail::sorted_time_labels(times);
    report.n_units = static_cast<long>(units.size());
    report.n_periods = static_cast<long>(times.size());
    for (const auto& u : units) {
        for (const auto& t : times) {
            auto it = counts.find({u, t});
            if (it == counts.end()) {
                report.missing_cells.push_back({u, t});
            } else if (it->second > 1) {
                report.duplicate_cells.push_back({u, t});
            }
        }
    }
    return report;
}

namespace detail {

inline std::string describe_cells(const std::vector<PanelCell>& cells) {
    std::string out;
    std::size_t shown = std::min<std::size_t>(cells.size(), 10);
    for (std::size_t i = 0; i < shown; ++i) {
        if (i > 0) out += ", ";
        out += "(" + cells[i].unit + "," + cells[i].time + ")";
    }
    if (cells.size() > shown) out += ", ...";
    return out;
}

inline void validate_dataset(const PanelDataset& ds) {
    const int n = ds.n_units(), t = ds.n_periods(), p = ds.n_inputs();
    if (n < 2) throw input_error("panel: need at least 2 units, got " + std::to_string(n));
    if (t < 1) throw input_error("panel: need at least 1 period");
    if (p < 1) throw input_error("panel: need at least 1 input column");
    if (ds.y.rows() != n || ds.y.cols() != t) throw input_error("panel: y shape mismatch");
    if (static_cast<int>(ds.column_names.size()) != p)
        throw input_error("panel: column name count mismatch");
    if (!ds.y.allFinite()) throw input_error("panel: non-finite value in output");
    for (const auto& m : ds.x) {
        if (m.rows() != n || m.cols() != t) throw input_error("panel: input shape mismatch");
        if (!m.allFinite()) throw input_error("panel: non-finite value in inputs");
    }
}

} // namespace detail

/// Load a balanced panel. Units keep first-appearance order; periods are
/// sorted ascending; an intercept ones-column is prepended when the schema
/// requests it. Unbalanced or duplicated cells are a hard error carrying the
/// offending cell list.
inline PanelDataset load_panel_csv(const std::string& path, const PanelSchema& schema) {
    if (schema.x_cols.empty() && !schema.intercept)
        throw input_error("schema: need at least one input column");
    auto rows = read_csv_file(path);
    if (rows.size() < 2) throw input_error("panel csv: no data rows in " + path);
    const auto& header = rows.front();

    auto col_index = [&](const std::string& name) {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) throw input_error("panel csv: missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t unit_idx = col_index(schema.unit_col);
    const std::size_t time_idx = col_index(schema.time_col);
    const std::size_t y_idx = col_index(schema.y_col);
    std::vector<std::size_t> x_idx;
    for (const auto& c : schema.x_cols) x_idx.push_back(col_index(c));

    std::vector<PanelCell> cells;
    cells.reserve(rows.size() - 1);
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() != header.size())
            throw input_error("panel csv: row " + std::to_string(r + 1) + " has " +
                              std::to_string(rows[r].size()) + " fields, header has " +
                              std::to_string(header.size()));
        cells.push_back({rows[r][unit_idx], rows[r][time_idx]});
    }

    BalanceReport report = validate_balance(cells);
    if (!report.balanced()) {
        std::string msg = "panel csv: unbalanced panel";
        if (!report.missing_cells.empty())
            msg += "; missing cells: " + detail::describe_cells(report.missing_cells);
        if (!report.duplicate_cells.empty())
            msg += "; duplicate cells: " + detail::describe_cells(report.duplicate_cells);
        throw input_error(msg);
    }

    PanelDataset ds;
    for (const auto& c : cells)
        if (std::find(ds.unit_ids.begin(), ds.unit_ids.end(), c.unit) == ds.unit_ids.end())
            ds.unit_ids.push_back(c.unit);
    {
        std::vector<std::string> times;
        for (const auto& c : cells)
            if (std::find(times.begin(), times.end(), c.time) == times.end()) times.push_back(c.time);
        ds.time_ids = detail::sorted_time_labels(times);
    }
    const int n = ds.n_units(), t = ds.n_periods();

    std::map<std::string, int> urow, tcol;
    for (int i = 0; i < n; ++i) urow[ds.unit_ids[i]] = i;
    for (int j = 0; j < t; ++j) tcol[ds.time_ids[j]] = j;

    const int p = static_cast<int>(x_idx.size()) + (schema.intercept ? 1 : 0);
    ds.y.resize(n, t);
    ds.x.assign(p, Eigen::MatrixXd::Zero(n, t));
    if (schema.intercept) {
        ds.x[0].setOnes();
        ds.column_names.push_back("const");
    }
    for (const auto& c : schema.x_cols) ds.column_names.push_back(c);

    auto parse_cell = [&](const std::string& raw, const std::string& col, std::size_t row) {
        double v;
        if (!try_parse_double(raw, v))
            throw input_error("panel csv: non-numeric value '" + raw + "' in column '" + col +
                              "' at row " + std::to_string(row + 1));
        return v;
    };
    const int x_off = schema.intercept ? 1 : 0;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const int i = urow[rows[r][unit_idx]];
        const int j = tcol[rows[r][time_idx]];
        ds.y(i, j) = parse_cell(rows[r][y_idx], schema.y_col, r);
        for (std::size_t k = 0; k < x_idx.size(); ++k)
            ds.x[x_off + k](i, j) = parse_cell(rows[r][x_idx[k]], schema.x_cols[k], r);
    }
    detail::validate_dataset(ds);
    return ds;
}

/// Long-format writer: one row per (unit, time), numeric values in shortest
/// round-trip form. Inverse of load_panel_csv with intercept=false and the
/// dataset's own column names.
inline void write_panel_csv(const PanelDataset& ds, std::ostream& out) {
    std::vector<std::string> header = {"unit", "time", "y"};
    header.insert(header.end(), ds.column_names.begin(), ds.column_names.end());
    write_csv_row(out, header);
    for (int i = 0; i < ds.n_units(); ++i) {
        for (int j = 0; j < ds.n_periods(); ++j) {
            std::vector<std::string> row = {ds.unit_ids[i], ds.time_ids[j], format_double(ds.y(i, j))};
            for (const auto& m : ds.x) row.push_back(format_double(m(i, j)));
            write_csv_row(out, row);
        }
    }
}

inline void write_panel_csv(const PanelDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw input_error("cannot write file: " + path);
    write_panel_csv(ds, out);
}

/// Natural-log transform of the output and/or selected input columns.
/// Dummies and other pass-through columns keep their values. Requested log on
/// a column with a value <= 0 is an error naming the column.
inline PanelDataset design_matrix(const PanelDataset& ds, bool log_y,
                                  const std::vector<bool>& log_x) {
    if (!log_x.empty() && static_cast<int>(log_x.size()) != ds.n_inputs())
        throw input_error("design: log flag count does not match input count");
    PanelDataset out = ds;
    if (log_y) {
        if ((out.y.array() <= 0.0).any())
            throw input_error("design: log requested on output containing values <= 0");
        out.y = out.y.array().log();
    }
    for (std::size_t k = 0; k < log_x.size(); ++k) {
        if (!log_x[k]) continue;
        if ((out.x[k].array() <= 0.0).any())
            throw input_error("design: log requested on column '" + ds.column_names[k] +
                              "' containing values <= 0");
        out.x[k] = out.x[k].array().log();
    }
    return out;
}

// Canonical JSON form: column-major numeric arrays, x nested per column.
inline void to_json(nlohmann::json& j, const PanelDataset& ds) {
    auto flatten = [](const Eigen::MatrixXd& m) {
        std::vector<double> v(static_cast<std::size_t>(m.size()));
        Eigen::Map<Eigen::MatrixXd>(v.data(), m.rows(), m.cols()) = m;
        return v;
    };
    j = nlohmann::json{{"unit_ids", ds.unit_ids},
                       {"time_ids", ds.time_ids},
                       {"column_names", ds.column_names},
                       {"y", flatten(ds.y)}};
    nlohmann::json xs = nlohmann::json::array();
    for (const auto& m : ds.x) xs.push_back(flatten(m));
    j["x"] = xs;
}

inline void from_json(const nlohmann::json& j, PanelDataset& ds) {
    ds.unit_ids = j.at("unit_ids").get<std::vector<std::string>>();
    ds.time_ids = j.at("time_ids").get<std::vector<std::string>>();
    ds.column_names = j.at("column_names").get<std::vector<std::string>>();
    const int n = static_cast<int>(ds.unit_ids.size());
    const int t = static_cast<int>(ds.time_ids.size());
    auto unflatten = [&](const std::vector<double>& v) {
        if (static_cast<int>(v.size()) != n * t) throw input_error("panel json: array size mismatch");
        return Eigen::MatrixXd(Eigen::Map<const Eigen::MatrixXd>(v.data(), n, t));
    };
    ds.y = unflatten(j.at("y").get<std::vector<double>>());
    ds.x.clear();
    for (const auto& col : j.at("x")) ds.x.push_back(unflatten(col.get<std::vector<double>>()));
    detail::validate_dataset(ds);
}

} // namespace stsfa
