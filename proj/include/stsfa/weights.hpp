#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "stsfa/csv.hpp"
#include "stsfa/errors.hpp"

namespace stsfa {

struct Point2 {
    double x = 0, y = 0;
};

/// Sparse nonnegative spatial weight matrix with a zero diagonal, stored as
/// sorted (row, col, weight) triplets. row_sums are always recomputed from
/// the entries. Immutable by convention after construction.
struct SpatialWeights {
    int n = 0;
    struct Triplet {
        int row = 0, col = 0;
        double value = 0;
    };
    std::vector<Triplet> entries;   // sorted by (row, col)
    std::vector<double> row_sums;   // length n
    bool standardized = false;
    std::vector<std::string> unit_ids; // optional; empty = positional binding

    static SpatialWeights from_triplets(int n, std::vector<Triplet> triplets,
                                        bool standardized_flag = false) {
        if (n <= 0) throw input_error("weights: unit count must be positive");
        SpatialWeights w;
        w.n = n;
        std::sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
            return a.row != b.row ? a.row < b.row : a.col < b.col;
        });
        for (const auto& t : triplets) {
            if (t.row < 0 || t.row >= n || t.col < 0 || t.col >= n)
                throw input_error("weights: index out of range: (" + std::to_string(t.row) + "," +
                                  std::to_string(t.col) + ")");
            if (t.row == t.col)
                throw input_error("weights: diagonal entry at unit " + std::to_string(t.row));
            if (!(t.value >= 0.0) || !std::isfinite(t.value))
                throw input_error("weights: negative or non-finite weight at (" +
                                  std::to_string(t.row) + "," + std::to_string(t.col) + ")");
            if (!w.entries.empty() && w.entries.back().row == t.row && w.entries.back().col == t.col)
                throw input_error("weights: duplicate entry at (" + std::to_string(t.row) + "," +
                                  std::to_string(t.col) + ")");
            if (t.value > 0.0) w.entries.push_back(t);
        }
        w.row_sums.assign(n, 0.0);
        for (const auto& t : w.entries) w.row_sums[t.row] += t.value;
        w.standardized = standardized_flag;
        return w;
    }

    double max_row_sum() const {
        double m = 0;
        for (double s : row_sums) m = std::max(m, s);
        return m;
    }

    /// W * v through the triplets.
    Eigen::VectorXd apply(const Eigen::VectorXd& v) const {
        Eigen::VectorXd out = Eigen::VectorXd::Zero(n);
        for (const auto& t : entries) out[t.row] += t.value * v[t.col];
        return out;
    }

    Eigen::MatrixXd dense() const {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
        for (const auto& t : entries) m(t.row, t.col) = t.value;
        return m;
    }
};

/// k-nearest-neighbour graph by Euclidean distance, self excluded, all
/// weights one. Distance ties break toward the lower unit index so repeated
/// runs give identical matrices.
inline SpatialWeights knn_weights(const std::vector<Point2>& coords, int k) {
    const int n = static_cast<int>(coords.size());
    if (k <= 0) throw input_error("knn: k must be positive");
    if (k >= n) throw input_error("knn: k=" + std::to_string(k) + " needs at least " +
                                  std::to_string(k + 1) + " units, got " + std::to_string(n));
    for (const auto& p : coords)
        if (!std::isfinite(p.x) || !std::isfinite(p.y))
            throw input_error("knn: non-finite coordinate");

    std::vector<SpatialWeights::Triplet> trip;
    trip.reserve(static_cast<std::size_t>(n) * k);
    std::vector<std::pair<double, int>> cand(n - 1);
    for (int i = 0; i < n; ++i) {
        int m = 0;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const double dx = coords[j].x - coords[i].x;
            const double dy = coords[j].y - coords[i].y;
            cand[m++] = {dx * dx + dy * dy, j};
        }
        std::partial_sort(cand.begin(), cand.begin() + k, cand.end());
        for (int q = 0; q < k; ++q) trip.push_back({i, cand[q].second, 1.0});
    }
    return SpatialWeights::from_triplets(n, std::move(trip));
}

struct GroupWeightsResult {
    SpatialWeights weights;
    std::vector<std::string> warnings; // singleton groups leave all-zero rows
};

/// Block contiguity: w_ij = 1 iff i != j and the units share a group label.
inline GroupWeightsResult group_contiguity_weights(const std::vector<std::string>& groups) {
    const int n = static_cast<int>(groups.size());
    if (n < 2) throw input_error("groups: need at least 2 units");
    std::map<std::string, std::vector<int>> members;
    for (int i = 0; i < n; ++i) members[groups[i]].push_back(i);

    bool any_pair = false;
    GroupWeightsResult res;
    std::vector<SpatialWeights::Triplet> trip;
    for (const auto& [label, idx] : members) {
        if (idx.size() < 2) {
            for (int i : idx)
                res.warnings.push_back("unit " + std::to_string(i) + " is alone in group '" +
                                       label + "'; its weight row is empty");
            continue;
        }
        any_pair = true;
        for (int a : idx)
            for (int b : idx)
                if (a != b) trip.push_back({a, b, 1.0});
    }
    if (!any_pair) throw input_error("groups: no group has two or more members");
    res.weights = SpatialWeights::from_triplets(n, std::move(trip));
    return res;
}

/// Divide every nonempty row by its sum; empty rows stay empty. Idempotent.
inline SpatialWeights row_standardize(const SpatialWeights& w) {
    std::vector<SpatialWeights::Triplet> trip = w.entries;
    for (auto& t : trip)
        if (w.row_sums[t.row] > 0.0) t.value /= w.row_sums[t.row];
    return SpatialWeights::from_triplets(w.n, std::move(trip), /*standardized_flag=*/true);
}

/// Largest |rho| the attenuation terms admit: keeps max_i rho * w_i. at or
/// below 1 - 1e-6 and |rho| below 1 - 1e-6.
inline double rho_bound(const SpatialWeights& w) {
    const double cap = 1.0 - 1e-6;
    const double mrs = w.max_row_sum();
    return mrs > 1.0 ? cap / mrs : cap;
}

/// Per-unit attenuation delta_i(rho) = 1 - rho * (row sum of W). Units with
/// no neighbours get delta = 1: they carry no spatial adjustment. Any
/// non-positive delta is a domain error naming the offending units.
inline std::vector<double> delta(const SpatialWeights& w, double rho) {
    std::vector<double> d(w.n);
    std::string offending;
    for (int i = 0; i < w.n; ++i) {
        d[i] = 1.0 - rho * w.row_sums[i];
        if (d[i] <= 0.0) {
            if (!offending.empty()) offending += ", ";
            offending += std::to_string(i);
        }
    }
    if (!offending.empty())
        throw std::domain_error("delta(rho): non-positive attenuation at units " + offending +
                                " for rho=" + format_double(rho));
    return d;
}

/// Solve (I - rho W) x = v. Direct dense solve up to n = 500; above that a
/// stationary iteration x <- v + rho W x (convergent while the spectral
/// radius of rho W is below one) to relative residual 1e-10.
inline Eigen::VectorXd spatial_inverse_apply(const SpatialWeights& w, double rho,
                                             const Eigen::VectorXd& v) {
    if (v.size() != w.n) throw input_error("spatial solve: vector length mismatch");
    if (rho == 0.0) return v;
    if (w.n <= 500) {
        Eigen::MatrixXd a = Eigen::MatrixXd::Identity(w.n, w.n) - rho * w.dense();
        Eigen::PartialPivLU<Eigen::MatrixXd> lu(a);
        Eigen::VectorXd x = lu.solve(v);
        const double resid = (a * x - v).norm();
        if (!x.allFinite() || resid > 1e-8 * std::max(1.0, v.norm()))
            throw numeric_error("spatial solve: singular system at rho=" + format_double(rho));
        return x;
    }
    Eigen::VectorXd x = v;
    Eigen::VectorXd wx = w.apply(x);
    const double vnorm = std::max(1.0, v.norm());
    for (int it = 0; it < 10000; ++it) {
        Eigen::VectorXd next = v + rho * wx;
        Eigen::VectorXd wnext = w.apply(next);
        if ((next - rho * wnext - v).norm() <= 1e-10 * vnorm) return next;
        x.swap(next);
        wx.swap(wnext);
    }
    throw numeric_error("spatial solve: no convergence within 10000 iterations at rho=" +
                        format_double(rho));
}

// ---- file formats ---------------------------------------------------------

/// Triplet CSV `i,j,w` with 0-based indices; header optional.
inline SpatialWeights read_weights_triplet_csv(const std::string& path, int n) {
    auto rows = read_csv_file(path);
    std::vector<SpatialWeights::Triplet> trip;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].empty() || (rows[r].size() == 1 && rows[r][0].empty())) continue;
        if (rows[r].size() != 3)
            throw input_error("weights triplet csv: row " + std::to_string(r + 1) +
                              " needs 3 fields");
        double i, j, v;
        if (!try_parse_double(rows[r][0], i) || !try_parse_double(rows[r][1], j) ||
            !try_parse_double(rows[r][2], v)) {
            if (r == 0) continue; // header line
            throw input_error("weights triplet csv: non-numeric row " + std::to_string(r + 1));
        }
        if (i != std::floor(i) || j != std::floor(j))
            throw input_error("weights triplet csv: non-integer index at row " +
                              std::to_string(r + 1));
        trip.push_back({static_cast<int>(i), static_cast<int>(j), v});
    }
    return SpatialWeights::from_triplets(n, std::move(trip));
}

inline void write_weights_triplet_csv(const SpatialWeights& w, std::ostream& out) {
    write_csv_row(out, {"i", "j", "w"});
    for (const auto& t : w.entries)
        write_csv_row(out, {std::to_string(t.row), std::to_string(t.col), format_double(t.value)});
}

inline void write_weights_triplet_csv(const SpatialWeights& w, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw input_error("cannot write file: " + path);
    write_weights_triplet_csv(w, out);
}

/// Group-label CSV `unit_id,group` (header required). Returns the block
/// matrix with rows in file order and the unit ids attached for alignment
/// checks at fit time.
inline GroupWeightsResult read_weights_groups_csv(const std::string& path) {
    auto rows = read_csv_file(path);
    if (rows.size() < 2) throw input_error("groups csv: no data rows");
    std::vector<std::string> ids, groups;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        if (rows[r].size() < 2)
            throw input_error("groups csv: row " + std::to_string(r + 1) + " needs 2 fields");
        ids.push_back(rows[r][0]);
        groups.push_back(rows[r][1]);
    }
    GroupWeightsResult res = group_contiguity_weights(groups);
    res.weights.unit_ids = std::move(ids);
    return res;
}

/// Dense CSV matrix, no header, n rows of n values. Capped at n = 500.
inline SpatialWeights read_weights_dense_csv(const std::string& path) {
    auto rows = read_csv_file(path);
    const int n = static_cast<int>(rows.size());
    if (n == 0) throw input_error("dense weights csv: empty file");
    if (n > 500) throw input_error("dense weights csv: capped at 500 units, got " + std::to_string(n));
    std::vector<SpatialWeights::Triplet> trip;
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(rows[i].size()) != n)
            throw input_error("dense weights csv: row " + std::to_string(i + 1) + " has " +
                              std::to_string(rows[i].size()) + " fields, expected " +
                              std::to_string(n));
        for (int j = 0; j < n; ++j) {
            double v;
            if (!try_parse_double(rows[i][j], v))
                throw input_error("dense weights csv: non-numeric value at (" + std::to_string(i) +
                                  "," + std::to_string(j) + ")");
            if (v != 0.0) trip.push_back({i, j, v});
        }
    }
    return SpatialWeights::from_triplets(n, std::move(trip));
}

} // namespace stsfa
