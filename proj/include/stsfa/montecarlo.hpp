#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "stsfa/estimator.hpp"
#include "stsfa/rng.hpp"

namespace stsfa {

/// Noise rule of the data-generating process.
///   literal   : v_i ~ N(0.75*(pi-2)/pi, 1), one draw per unit, constant over t
///   zero_mean : v_i ~ N(0, 1), one draw per unit, constant over t
///   iid       : v_it ~ N(0, 0.75*(pi-2)/pi), independent across units and periods
enum class VSpec { literal, zero_mean, iid };

/// How the unit-level inefficiency field is assembled from the half-normal
/// draws: through the full spatial inverse or through the per-unit
/// attenuation the likelihood itself uses.
enum class UForm { inverse, delta };

inline constexpr double dgp_noise_scale = 0.75 * (pi - 2.0) / pi;

struct DgpConfig {
    int n = 100;
    int t = 5;
    double beta0 = 5.0;
    double beta1 = 5.0;
    double rho = 0.0;
    double eta = 0.0;
    double k_frac = 0.10;
    VSpec v_spec = VSpec::literal;
    UForm u_form = UForm::inverse;
    bool x_varying = false; // one regressor draw per unit vs per (unit, period)
    bool standardize_w = true;
    std::uint64_t seed = 0;
};

struct SimulatedPanel {
    PanelDataset data;
    SpatialWeights weights;
    ParamVector truth;
};

/// Single-input single-output production panel:
///   y_it = beta0 + beta1 x + v - exp(-eta (t - T)) u_i
/// with x ~ U(0,1), v per the noise rule, u_i from half-normal unit draws
/// spread by the chosen spatial form over a k-nearest-neighbour weight matrix
/// with k = round(k_frac * n). Draw order is fixed (coordinates, x, v, u), so
/// the panel is a pure function of the config.
inline SimulatedPanel simulate_dgp(const DgpConfig& cfg) {
    if (cfg.n < 2) throw input_error("dgp: need at least 2 units");
    if (cfg.t < 1) throw input_error("dgp: need at least 1 period");
    const int k = static_cast<int>(std::lround(cfg.k_frac * cfg.n));
    if (k < 1) throw input_error("dgp: k_frac * n must round to at least 1 neighbour");
    if (k >= cfg.n) throw input_error("dgp: k_frac * n leaves no non-neighbours");

    Rng rng(cfg.seed);
    std::vector<Point2> coords(cfg.n);
    for (auto& p : coords) {
        p.x = rng.uniform01();
        p.y = rng.uniform01();
    }
    SpatialWeights w = knn_weights(coords, k);
    if (cfg.standardize_w) w = row_standardize(w);
    if (std::abs(cfg.rho) >= rho_bound(w))
        throw input_error("dgp: rho outside the admissible range of this weight matrix");

    const int n = cfg.n, t = cfg.t;
    Eigen::MatrixXd x(n, t);
    if (cfg.x_varying) {
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < t; ++j) x(i, j) = rng.uniform01();
    } else {
        for (int i = 0; i < n; ++i) x.row(i).setConstant(rng.uniform01());
    }

    Eigen::MatrixXd v(n, t);
    switch (cfg.v_spec) {
    case VSpec::literal:
        for (int i = 0; i < n; ++i) v.row(i).setConstant(rng.normal(dgp_noise_scale, 1.0));
        break;
    case VSpec::zero_mean:
        for (int i = 0; i < n; ++i) v.row(i).setConstant(rng.normal(0.0, 1.0));
        break;
    case VSpec::iid:
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < t; ++j) v(i, j) = rng.normal(0.0, std::sqrt(dgp_noise_scale));
        break;
    }

    Eigen::VectorXd u_tilde(n);
    for (int i = 0; i < n; ++i) u_tilde[i] = rng.half_normal();
    Eigen::VectorXd u_unit;
    if (cfg.u_form == UForm::inverse) {
        u_unit = spatial_inverse_apply(w, cfg.rho, u_tilde);
    } else {
        const std::vector<double> d = delta(w, cfg.rho);
        u_unit = u_tilde;
        for (int i = 0; i < n; ++i) u_unit[i] /= d[i];
    }

    const DecayProfile decay = DecayProfile::make(cfg.eta, t);
    SimulatedPanel out;
    out.data.y = (cfg.beta0 + cfg.beta1 * x.array() + v.array()).matrix();
    out.data.y -= u_unit * decay.values.transpose();
    out.data.x = {Eigen::MatrixXd::Ones(n, t), x};
    out.data.column_names = {"const", "x"};
    for (int i = 0; i < n; ++i) out.data.unit_ids.push_back(std::to_string(i + 1));
    for (int j = 0; j < t; ++j) out.data.time_ids.push_back(std::to_string(j + 1));
    out.weights = std::move(w);

    out.truth.beta = Eigen::Vector2d(cfg.beta0, cfg.beta1);
    out.truth.sigma2_v = cfg.v_spec == VSpec::iid ? dgp_noise_scale : 1.0;
    out.truth.sigma2_u = 1.0;
    out.truth.rho = cfg.rho;
    out.truth.eta = cfg.eta;
    return out;
}

struct ParamStats {
    double bias = 0, sd = 0, mse = 0;
};

/// bias = mean - truth; sd with the R-1 denominator; mse about the truth with
/// the 1/R denominator, so mse = bias^2 + sd^2 (R-1)/R holds identically.
inline ParamStats summarize(const std::vector<double>& estimates, double truth) {
    const int r = static_cast<int>(estimates.size());
    if (r < 2) throw input_error("summarize: need at least 2 estimates");
    double mean = 0;
    for (double e : estimates) mean += e;
    mean /= r;
    double ss = 0, sq = 0;
    for (double e : estimates) {
        ss += (e - mean) * (e - mean);
        sq += (e - truth) * (e - truth);
    }
    return {mean - truth, std::sqrt(ss / (r - 1)), sq / r};
}

struct McCell {
    DgpConfig config;
    int n_total = 0;
    int n_converged = 0; // replicates that did not stop on the iteration cap
    std::vector<std::string> param_names;
    std::vector<ParamStats> stats; // aligned with param_names; over converged reps
};

struct ReplicateRecord {
    int cell = 0, rep = 0;
    Convergence convergence = Convergence::max_iter;
    std::vector<double> estimates;
    double loglik = 0;
};

struct MonteCarloReport {
    std::vector<McCell> cells;
    std::vector<ReplicateRecord> replicates; // filled when keep_replicates is set
    double runtime_seconds = 0;              // informational; never serialized
};

enum class McInit { truth, data_driven };

struct McOptions {
    McInit init = McInit::truth;
    int threads = 1;
    bool keep_replicates = false;
    FitOptions fit_options = [] {
        FitOptions f;
        f.std_errors = false;
        f.efficiency = false;
        return f;
    }();
};

namespace detail {

inline std::vector<std::string> mc_param_names(const ModelSpec& spec,
                                               const std::vector<std::string>& cols) {
    std::vector<std::string> names = cols;
    names.push_back("sigma2_v");
    names.push_back("sigma2_u");
    if (spec.spatial) names.push_back("rho");
    if (spec.temporal == Temporal::time_varying) names.push_back("eta");
    return names;
}

inline std::vector<double> mc_param_values(const ModelSpec& spec, const ParamVector& pv) {
    std::vector<double> v(pv.beta.data(), pv.beta.data() + pv.beta.size());
    v.push_back(pv.sigma2_v);
    v.push_back(pv.sigma2_u);
    if (spec.spatial) v.push_back(pv.rho);
    if (spec.temporal == Temporal::time_varying) v.push_back(pv.eta);
    return v;
}

} // namespace detail

/// Replicated estimation over a grid of DGP configurations. Per-replicate
/// seeds come from derive_seed(master_seed, cell, rep), and results land in
/// preassigned slots, so the report is identical for any thread count.
/// Replicates that hit the iteration cap are counted but excluded from the
/// moments; fits that converge onto a domain boundary stay in.
inline MonteCarloReport run_experiment(const std::vector<DgpConfig>& grid, int reps,
                                       const ModelSpec& spec, std::uint64_t master_seed,
                                       const McOptions& opts = {}) {
    if (reps < 2) throw input_error("mc: need at least 2 replicates");
    if (grid.empty()) throw input_error("mc: empty grid");
    const auto t_start = std::chrono::steady_clock::now();

    const int cells = static_cast<int>(grid.size());
    const long total = static_cast<long>(cells) * reps;
    std::vector<ReplicateRecord> slots(static_cast<std::size_t>(total));

    std::atomic<long> next{0};
    auto worker = [&] {
        for (long idx = next.fetch_add(1); idx < total; idx = next.fetch_add(1)) {
            const int c = static_cast<int>(idx / reps);
            const int r = static_cast<int>(idx % reps);
            DgpConfig cfg = grid[c];
            cfg.seed = derive_seed(master_seed, static_cast<std::uint64_t>(c),
                                   static_cast<std::uint64_t>(r));
            const SimulatedPanel sim = simulate_dgp(cfg);
            FitOptions fo = opts.fit_options;
            if (opts.init == McInit::truth) fo.init = sim.truth;
            ReplicateRecord rec;
            rec.cell = c;
            rec.rep = r;
            const FitResult fr =
                fit(spec, sim.data, spec.spatial ? &sim.weights : nullptr, fo);
            rec.convergence = fr.convergence;
            rec.estimates = detail::mc_param_values(spec, fr.params);
            rec.loglik = fr.loglik;
            slots[static_cast<std::size_t>(idx)] = std::move(rec);
        }
    };
    const int n_threads = std::max(1, opts.threads);
    if (n_threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int i = 0; i < n_threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    MonteCarloReport report;
    for (int c = 0; c < cells; ++c) {
        McCell cell;
        cell.config = grid[c];
        cell.n_total = reps;
        DgpConfig probe = grid[c];
        probe.seed = derive_seed(master_seed, static_cast<std::uint64_t>(c), 0);
        const SimulatedPanel sim0 = simulate_dgp(probe);
        cell.param_names = detail::mc_param_names(spec, sim0.data.column_names);
        const std::vector<double> truth = detail::mc_param_values(spec, sim0.truth);

        std::vector<std::vector<double>> by_param(cell.param_names.size());
        for (int r = 0; r < reps; ++r) {
            const auto& rec = slots[static_cast<std::size_t>(c) * reps + r];
            if (rec.convergence == Convergence::max_iter) continue;
            ++cell.n_converged;
            for (std::size_t j = 0; j < by_param.size(); ++j)
                by_param[j].push_back(rec.estimates[j]);
        }
        for (std::size_t j = 0; j < by_param.size(); ++j)
            cell.stats.push_back(by_param[j].size() >= 2 ? summarize(by_param[j], truth[j])
                                                         : ParamStats{});
        report.cells.push_back(std::move(cell));
    }
    if (opts.keep_replicates) report.replicates = std::move(slots);
    report.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return report;
}

/// One row per cell x parameter; numbers in shortest round-trip form so equal
/// runs are byte-identical.
inline void write_report_csv(const MonteCarloReport& report, std::ostream& out) {
    write_csv_row(out, {"rho", "eta", "n", "param", "bias", "sd", "mse", "n_converged", "n_total"});
    for (const auto& cell : report.cells) {
        for (std::size_t j = 0; j < cell.param_names.size(); ++j) {
            write_csv_row(out, {format_double(cell.config.rho), format_double(cell.config.eta),
                                std::to_string(cell.config.n), cell.param_names[j],
                                format_double(cell.stats[j].bias), format_double(cell.stats[j].sd),
                                format_double(cell.stats[j].mse), std::to_string(cell.n_converged),
                                std::to_string(cell.n_total)});
        }
    }
}

inline void write_estimates_csv(const MonteCarloReport& report, const std::vector<DgpConfig>& grid,
                                std::ostream& out) {
    if (report.replicates.empty()) return;
    std::vector<std::string> header = {"cell", "rho", "eta", "n", "rep", "convergence", "loglik"};
    const auto& names = report.cells.front().param_names;
    header.insert(header.end(), names.begin(), names.end());
    write_csv_row(out, header);
    auto conv_name = [](Convergence c) {
        switch (c) {
        case Convergence::converged: return "converged";
        case Convergence::boundary: return "boundary";
        default: return "max_iter";
        }
    };
    for (const auto& r : report.replicates) {
        std::vector<std::string> row = {
            std::to_string(r.cell),           format_double(grid[r.cell].rho),
            format_double(grid[r.cell].eta),  std::to_string(grid[r.cell].n),
            std::to_string(r.rep),            conv_name(r.convergence),
            format_double(r.loglik)};
        for (double e : r.estimates) row.push_back(format_double(e));
        write_csv_row(out, row);
    }
}

/// Text table for one sample size: parameter blocks, one eta row group with
/// bias/sd/MSE lines, rho values across the columns.
inline std::string format_report_table(const MonteCarloReport& report, int n) {
    std::vector<double> rhos, etas;
    for (const auto& c : report.cells) {
        if (c.config.n != n) continue;
        if (std::find(rhos.begin(), rhos.end(), c.config.rho) == rhos.end())
            rhos.push_back(c.config.rho);
        if (std::find(etas.begin(), etas.end(), c.config.eta) == etas.end())
            etas.push_back(c.config.eta);
    }
    if (rhos.empty()) return "";
    const auto& names = report.cells.front().param_names;

    auto find_cell = [&](double rho, double eta) -> const McCell* {
        for (const auto& c : report.cells)
            if (c.config.n == n && c.config.rho == rho && c.config.eta == eta) return &c;
        return nullptr;
    };

    std::ostringstream os;
    os << "Monte Carlo results, " << n << " units\n";
    os << std::string(12 + 6, ' ') << "rho\n";
    os << "param   eta        ";
    for (double r : rhos) os << "  " << format_double_6g(r);
    os << "\n";
    const std::string rule(20 + 10 * rhos.size(), '-');
    os << rule << "\n";
    const char* stat_names[3] = {"bias", "sd", "MSE"};
    for (std::size_t j = 0; j < names.size(); ++j) {
        for (double eta : etas) {
            for (int s = 0; s < 3; ++s) {
                char head[40];
                std::snprintf(head, sizeof(head), "%-8s%-7s%-5s", s == 0 ? names[j].c_str() : "",
                              s == 0 ? format_double_6g(eta).c_str() : "", stat_names[s]);
                os << head;
                for (double rho : rhos) {
                    const McCell* c = find_cell(rho, eta);
                    double v = 0;
                    if (c) {
                        const ParamStats& ps = c->stats[j];
                        v = s == 0 ? ps.bias : s == 1 ? ps.sd : ps.mse;
                    }
                    char buf[16];
                    std::snprintf(buf, sizeof(buf), " %9.4f", v);
                    os << buf;
                }
                os << "\n";
            }
        }
        os << rule << "\n";
    }
    return os.str();
}

} // namespace stsfa
