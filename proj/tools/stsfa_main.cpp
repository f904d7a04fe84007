// stsfa command line: estimate frontier models on panel data, build spatial
// weight matrices, simulate panels, and run Monte Carlo experiments.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <stsfa/stsfa.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int exit_ok = 0;
constexpr int exit_invalid_input = 1;
constexpr int exit_misaligned_weights = 2;
constexpr int exit_max_iter = 3;
constexpr int exit_nonfinite_likelihood = 4;

struct ManifestWriter {
    std::string command;
    std::vector<std::string> argv;
    std::vector<std::string> inputs;
    std::string out_dir;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

    void write() const {
        json j;
        j["command"] = command;
        j["argv"] = argv;
        j["inputs"] = inputs;
        j["out_dir"] = out_dir;
        j["tool_version"] = stsfa::version;
        j["wall_time_seconds"] =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::ofstream out(fs::path(out_dir) / "manifest.json", std::ios::binary);
        out << j.dump(2) << "\n";
    }
};

void ensure_out_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw stsfa::input_error("cannot create output directory: " + dir);
}

std::ofstream open_out(const fs::path& p) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw stsfa::input_error("cannot write file: " + p.string());
    return out;
}

// ---- estimate --------------------------------------------------------------

struct EstimateArgs {
    std::string data, unit_col, time_col, y_col;
    std::vector<std::string> x_cols, log_x;
    std::string model, weights_file, wformat = "triplet", te_mode = "bc92", out;
    bool cost = false, log_y = false, pool = false, no_intercept = false, standardize = false;
};

stsfa::ModelSpec model_spec_from_name(const std::string& name) {
    stsfa::ModelSpec spec;
    if (name == "sfa" || name == "ssfa") spec.temporal = stsfa::Temporal::cross_section;
    else if (name == "tsfa-ti" || name == "stsfa-ti") spec.temporal = stsfa::Temporal::time_invariant;
    else if (name == "tsfa-tv" || name == "stsfa-tv") spec.temporal = stsfa::Temporal::time_varying;
    else throw stsfa::input_error("unknown model: " + name);
    spec.spatial = name == "ssfa" || name.rfind("stsfa", 0) == 0;
    return spec;
}

std::string convergence_name(stsfa::Convergence c) {
    switch (c) {
    case stsfa::Convergence::converged: return "converged";
    case stsfa::Convergence::boundary: return "boundary";
    default: return "max_iter";
    }
}

json params_to_json(const stsfa::ModelSpec& spec, const std::vector<std::string>& names,
                    const stsfa::ParamVector& pv) {
    json j;
    for (int i = 0; i < pv.beta.size(); ++i) j[names[i]] = pv.beta[i];
    j["sigma2_v"] = pv.sigma2_v;
    j["sigma2_u"] = pv.sigma2_u;
    if (spec.spatial) j["rho"] = pv.rho;
    if (spec.temporal == stsfa::Temporal::time_varying) j["eta"] = pv.eta;
    return j;
}

std::string significance_stars(double coef, double se) {
    if (!std::isfinite(se) || se <= 0) return "";
    const double z = std::abs(coef / se);
    if (z > 2.575829) return "***";
    if (z > 1.959964) return "**";
    if (z > 1.644854) return "*";
    return "";
}

void write_fit_table(const stsfa::FitResult& fr, const std::string& model, int n, int t,
                     std::ostream& out) {
    out << "Model: " << model << "   N=" << n << " T=" << t << "\n";
    out << "convergence: " << convergence_name(fr.convergence) << " (" << fr.iterations
        << " iterations)\n\n";
    char line[128];
    std::snprintf(line, sizeof(line), "%-14s %12s %4s %12s\n", "parameter", "estimate", "",
                  "std.err");
    out << line;
    out << std::string(46, '-') << "\n";
    for (std::size_t i = 0; i < fr.std_errors.names.size(); ++i) {
        double est = 0;
        const int p = static_cast<int>(fr.params.beta.size());
        const int idx = static_cast<int>(i);
        if (idx < p) est = fr.params.beta[idx];
        else if (fr.std_errors.names[i] == "sigma2_v") est = fr.params.sigma2_v;
        else if (fr.std_errors.names[i] == "sigma2_u") est = fr.params.sigma2_u;
        else if (fr.std_errors.names[i] == "rho") est = fr.params.rho;
        else est = fr.params.eta;

        std::string se_txt;
        std::string stars;
        if (fr.std_errors.status[i] == 'b') se_txt = "(boundary)";
        else if (fr.std_errors.status[i] == 'f') se_txt = "(fixed)";
        else if (!std::isfinite(fr.std_errors.values[idx])) se_txt = "(n/a)";
        else {
            se_txt = stsfa::format_double_6g(fr.std_errors.values[idx]);
            stars = significance_stars(est, fr.std_errors.values[idx]);
        }
        std::snprintf(line, sizeof(line), "%-14s %12s %-4s %12s\n",
                      fr.std_errors.names[i].c_str(), stsfa::format_double_6g(est).c_str(),
                      stars.c_str(), se_txt.c_str());
        out << line;
    }
    out << std::string(46, '-') << "\n";
    std::snprintf(line, sizeof(line), "%-14s %12s\n", "loglik",
                  stsfa::format_double_6g(fr.loglik).c_str());
    out << line;
    std::snprintf(line, sizeof(line), "%-14s %12s\n", "AIC",
                  stsfa::format_double_6g(fr.aic).c_str());
    out << line;
    if (fr.std_errors.used_pseudo_inverse)
        out << "\nwarning: Hessian not negative definite; std errors from a pseudo-inverse\n";
}

int run_estimate(const EstimateArgs& a, ManifestWriter manifest) {
    const stsfa::ModelSpec base = model_spec_from_name(a.model);
    if (base.spatial && a.weights_file.empty())
        throw stsfa::input_error("model " + a.model + " requires --weights");
    if (!base.spatial && !a.weights_file.empty())
        throw stsfa::input_error("model " + a.model + " does not take --weights");

    stsfa::PanelSchema schema;
    schema.unit_col = a.unit_col;
    schema.time_col = a.time_col;
    schema.y_col = a.y_col;
    schema.x_cols = a.x_cols;
    schema.intercept = !a.no_intercept;
    stsfa::PanelDataset ds = stsfa::load_panel_csv(a.data, schema);

    std::vector<bool> log_flags(ds.column_names.size(), false);
    for (const auto& c : a.log_x) {
        auto it = std::find(ds.column_names.begin(), ds.column_names.end(), c);
        if (it == ds.column_names.end())
            throw stsfa::input_error("--log-x names unknown column '" + c + "'");
        log_flags[static_cast<std::size_t>(it - ds.column_names.begin())] = true;
    }
    ds = stsfa::design_matrix(ds, a.log_y, log_flags);

    std::optional<stsfa::SpatialWeights> w;
    if (base.spatial) {
        if (a.wformat == "triplet")
            w = stsfa::read_weights_triplet_csv(a.weights_file, ds.n_units());
        else if (a.wformat == "groups")
            w = stsfa::read_weights_groups_csv(a.weights_file).weights;
        else if (a.wformat == "dense")
            w = stsfa::read_weights_dense_csv(a.weights_file);
        else
            throw stsfa::input_error("unknown --wformat: " + a.wformat);
        if (a.standardize) {
            auto ids = w->unit_ids;
            w = stsfa::row_standardize(*w);
            w->unit_ids = std::move(ids);
        }
    }

    stsfa::ModelSpec spec = base;
    spec.sign = a.cost ? stsfa::FrontierSign::cost() : stsfa::FrontierSign::production();
    spec.te_mode = (a.te_mode == "bc92") ? stsfa::TeMode::bc92 : stsfa::TeMode::plain;
    spec.pool = a.pool;

    const stsfa::FitResult fr = stsfa::fit(spec, ds, w ? &*w : nullptr);

    ensure_out_dir(a.out);
    {
        json j;
        j["model"] = a.model;
        j["n"] = ds.n_units();
        j["t"] = ds.n_periods();
        j["p"] = ds.n_inputs();
        j["cost_frontier"] = a.cost;
        j["te_mode"] = a.te_mode;
        j["loglik"] = fr.loglik;
        j["aic"] = fr.aic;
        j["k_free"] = fr.k_free;
        j["convergence"] = convergence_name(fr.convergence);
        j["iterations"] = fr.iterations;
        j["params"] = params_to_json(spec, ds.column_names, fr.params);
        j["init"] = params_to_json(spec, ds.column_names, fr.init);
        json se = json::object();
        for (std::size_t i = 0; i < fr.std_errors.names.size(); ++i) {
            json item;
            item["status"] = fr.std_errors.status[i] == 'e'   ? "estimated"
                             : fr.std_errors.status[i] == 'b' ? "boundary"
                                                              : "fixed";
            if (fr.std_errors.status[i] == 'e' &&
                std::isfinite(fr.std_errors.values[static_cast<int>(i)]))
                item["value"] = fr.std_errors.values[static_cast<int>(i)];
            else
                item["value"] = nullptr;
            se[fr.std_errors.names[i]] = item;
        }
        j["std_errors"] = se;
        j["std_errors_pseudo_inverse"] = fr.std_errors.used_pseudo_inverse;
        j["tool_version"] = stsfa::version;
        open_out(fs::path(a.out) / "fit.json") << j.dump(2) << "\n";
    }
    {
        auto out = open_out(fs::path(a.out) / "efficiency.csv");
        stsfa::write_csv_row(out, {"unit", "time", "te"});
        for (int i = 0; i < ds.n_units(); ++i)
            for (int j = 0; j < ds.n_periods(); ++j)
                stsfa::write_csv_row(out, {ds.unit_ids[i], ds.time_ids[j],
                                           stsfa::format_double(fr.efficiency(i, j))});
    }
    {
        auto out = open_out(fs::path(a.out) / "table.txt");
        write_fit_table(fr, a.model, ds.n_units(), ds.n_periods(), out);
    }
    manifest.inputs.push_back(a.data);
    if (!a.weights_file.empty()) manifest.inputs.push_back(a.weights_file);
    manifest.out_dir = a.out;
    manifest.write();
    std::cout << "estimate: " << a.model << " loglik=" << stsfa::format_double_6g(fr.loglik)
              << " aic=" << stsfa::format_double_6g(fr.aic) << " ["
              << convergence_name(fr.convergence) << "] -> " << a.out << "\n";
    return fr.convergence == stsfa::Convergence::max_iter ? exit_max_iter : exit_ok;
}

// ---- weights ---------------------------------------------------------------

struct WeightsArgs {
    std::string coords, groups, out;
    int knn = 0;
    bool standardize = false;
};

int run_weights(const WeightsArgs& a, ManifestWriter manifest) {
    if (a.coords.empty() == a.groups.empty())
        throw stsfa::input_error("weights: need exactly one of --coords or --groups");

    stsfa::SpatialWeights w;
    std::vector<std::string> ids;
    std::vector<std::string> warnings;
    if (!a.coords.empty()) {
        if (a.knn <= 0) throw stsfa::input_error("weights: --knn must be positive");
        auto rows = stsfa::read_csv_file(a.coords);
        if (rows.size() < 2) throw stsfa::input_error("coords csv: no data rows");
        std::vector<stsfa::Point2> pts;
        for (std::size_t r = 1; r < rows.size(); ++r) {
            if (rows[r].size() < 3)
                throw stsfa::input_error("coords csv: row " + std::to_string(r + 1) +
                                         " needs 3 fields (unit,x,y)");
            stsfa::Point2 p;
            if (!stsfa::try_parse_double(rows[r][1], p.x) ||
                !stsfa::try_parse_double(rows[r][2], p.y))
                throw stsfa::input_error("coords csv: non-numeric coordinate at row " +
                                         std::to_string(r + 1));
            ids.push_back(rows[r][0]);
            pts.push_back(p);
        }
        w = stsfa::knn_weights(pts, a.knn);
    } else {
        auto res = stsfa::read_weights_groups_csv(a.groups);
        w = std::move(res.weights);
        ids = w.unit_ids;
        warnings = std::move(res.warnings);
    }
    if (a.standardize) w = stsfa::row_standardize(w);
    w.unit_ids = ids;

    ensure_out_dir(a.out);
    stsfa::write_weights_triplet_csv(w, (fs::path(a.out) / "weights.csv").string());
    {
        auto out = open_out(fs::path(a.out) / "units.csv");
        stsfa::write_csv_row(out, {"index", "unit"});
        for (std::size_t i = 0; i < ids.size(); ++i)
            stsfa::write_csv_row(out, {std::to_string(i), ids[i]});
    }
    {
        auto out = open_out(fs::path(a.out) / "summary.txt");
        double mn = std::numeric_limits<double>::infinity(), mx = 0;
        for (double s : w.row_sums) {
            mn = std::min(mn, s);
            mx = std::max(mx, s);
        }
        out << "n " << w.n << "\n";
        out << "nnz " << w.entries.size() << "\n";
        out << "min_row_sum " << stsfa::format_double_6g(mn) << "\n";
        out << "max_row_sum " << stsfa::format_double_6g(mx) << "\n";
        out << "standardized " << (w.standardized ? "true" : "false") << "\n";
        for (const auto& msg : warnings) out << "warning: " << msg << "\n";
    }
    for (const auto& msg : warnings) std::cerr << "warning: " << msg << "\n";
    manifest.inputs.push_back(a.coords.empty() ? a.groups : a.coords);
    manifest.out_dir = a.out;
    manifest.write();
    std::cout << "weights: n=" << w.n << " nnz=" << w.entries.size() << " -> " << a.out << "\n";
    return exit_ok;
}

// ---- simulate / mc ---------------------------------------------------------

stsfa::VSpec parse_v_spec(const std::string& s) {
    if (s == "literal") return stsfa::VSpec::literal;
    if (s == "zero-mean") return stsfa::VSpec::zero_mean;
    if (s == "iid") return stsfa::VSpec::iid;
    throw stsfa::input_error("unknown --v-spec: " + s);
}

stsfa::UForm parse_u_form(const std::string& s) {
    if (s == "inverse") return stsfa::UForm::inverse;
    if (s == "delta") return stsfa::UForm::delta;
    throw stsfa::input_error("unknown --u-form: " + s);
}

struct SimulateArgs {
    int n = 100, t = 5;
    double rho = 0, eta = 0, k_frac = 0.10;
    std::uint64_t seed = 0;
    std::string v_spec = "literal", u_form = "inverse", out;
    bool x_varying = false;
};

int run_simulate(const SimulateArgs& a, ManifestWriter manifest) {
    stsfa::DgpConfig cfg;
    cfg.n = a.n;
    cfg.t = a.t;
    cfg.rho = a.rho;
    cfg.eta = a.eta;
    cfg.k_frac = a.k_frac;
    cfg.seed = a.seed;
    cfg.v_spec = parse_v_spec(a.v_spec);
    cfg.u_form = parse_u_form(a.u_form);
    cfg.x_varying = a.x_varying;
    const stsfa::SimulatedPanel sim = stsfa::simulate_dgp(cfg);

    ensure_out_dir(a.out);
    stsfa::write_panel_csv(sim.data, (fs::path(a.out) / "panel.csv").string());
    stsfa::write_weights_triplet_csv(sim.weights, (fs::path(a.out) / "weights.csv").string());
    {
        json j;
        j["beta0"] = sim.truth.beta[0];
        j["beta1"] = sim.truth.beta[1];
        j["sigma2_v"] = sim.truth.sigma2_v;
        j["sigma2_u"] = sim.truth.sigma2_u;
        j["rho"] = sim.truth.rho;
        j["eta"] = sim.truth.eta;
        j["n"] = a.n;
        j["t"] = a.t;
        j["k"] = static_cast<int>(std::lround(a.k_frac * a.n));
        j["seed"] = a.seed;
        j["v_spec"] = a.v_spec;
        j["u_form"] = a.u_form;
        j["x_varying"] = a.x_varying;
        open_out(fs::path(a.out) / "truth.json") << j.dump(2) << "\n";
    }
    manifest.out_dir = a.out;
    manifest.write();
    std::cout << "simulate: n=" << a.n << " t=" << a.t << " -> " << a.out << "\n";
    return exit_ok;
}

struct McArgs {
    std::vector<int> n = {100, 200, 400};
    std::vector<double> rho = {0.05, 0.2, 0.4, 0.6, 0.8};
    std::vector<double> eta = {-0.10, -0.05, 0.0, 0.05, 0.10};
    int reps = 1000, t = 5, threads = 0;
    std::uint64_t seed = 0;
    std::string v_spec = "literal", u_form = "inverse", init = "truth", model = "stsfa-tv", out;
    bool x_varying = false, dump_estimates = false;
};

int run_mc(const McArgs& a, ManifestWriter manifest) {
    if (a.n.empty() || a.rho.empty() || a.eta.empty())
        throw stsfa::input_error("mc: grid lists must be nonempty");
    if (a.reps < 2) throw stsfa::input_error("mc: --reps must be at least 2");

    std::vector<stsfa::DgpConfig> grid;
    for (int n : a.n) {
        for (double eta : a.eta) {
            for (double rho : a.rho) {
                stsfa::DgpConfig cfg;
                cfg.n = n;
                cfg.t = a.t;
                cfg.rho = rho;
                cfg.eta = eta;
                cfg.v_spec = parse_v_spec(a.v_spec);
                cfg.u_form = parse_u_form(a.u_form);
                cfg.x_varying = a.x_varying;
                grid.push_back(cfg);
            }
        }
    }

    stsfa::ModelSpec spec = model_spec_from_name(a.model);
    stsfa::McOptions opts;
    opts.init = a.init == "data" ? stsfa::McInit::data_driven : stsfa::McInit::truth;
    opts.keep_replicates = a.dump_estimates;
    int threads = a.threads;
    if (threads <= 0) {
        if (const char* env = std::getenv("STSFA_THREADS")) threads = std::atoi(env);
        if (threads <= 0) threads = 1;
    }
    opts.threads = threads;

    const stsfa::MonteCarloReport report =
        stsfa::run_experiment(grid, a.reps, spec, a.seed, opts);

    ensure_out_dir(a.out);
    {
        auto out = open_out(fs::path(a.out) / "report.csv");
        stsfa::write_report_csv(report, out);
    }
    for (int n : a.n) {
        auto out = open_out(fs::path(a.out) / ("table_n" + std::to_string(n) + ".txt"));
        out << stsfa::format_report_table(report, n);
    }
    if (a.dump_estimates) {
        auto out = open_out(fs::path(a.out) / "estimates.csv");
        stsfa::write_estimates_csv(report, grid, out);
    }
    manifest.out_dir = a.out;
    manifest.write();
    std::cout << "mc: " << grid.size() << " cells x " << a.reps << " reps in "
              << stsfa::format_double_6g(report.runtime_seconds) << " s -> " << a.out << "\n";
    return exit_ok;
}

// ---- replay ----------------------------------------------------------------

int dispatch(const std::vector<std::string>& argv);

int run_replay(const std::string& manifest_path, const std::string& out_override) {
    std::ifstream in(manifest_path, std::ios::binary);
    if (!in) throw stsfa::input_error("cannot open manifest: " + manifest_path);
    json j = json::parse(in);
    std::vector<std::string> argv = j.at("argv").get<std::vector<std::string>>();
    if (!out_override.empty()) {
        for (std::size_t i = 0; i + 1 < argv.size(); ++i)
            if (argv[i] == "--out") argv[i + 1] = out_override;
    }
    return dispatch(argv);
}

// ---- main ------------------------------------------------------------------

int dispatch(const std::vector<std::string>& args) {
    CLI::App app{"spatio-temporal stochastic frontier estimation"};
    app.require_subcommand(1);

    EstimateArgs ea;
    auto* est = app.add_subcommand("estimate", "fit a frontier model to a panel CSV");
    est->add_option("--data", ea.data, "panel CSV file")->required();
    est->add_option("--unit", ea.unit_col, "unit id column")->required();
    est->add_option("--time", ea.time_col, "time column")->required();
    est->add_option("--y", ea.y_col, "output column")->required();
    est->add_option("--x", ea.x_cols, "input columns")->required()->delimiter(',');
    est->add_option("--model", ea.model, "sfa|ssfa|tsfa-ti|tsfa-tv|stsfa-ti|stsfa-tv")->required();
    est->add_option("--weights", ea.weights_file, "weight matrix file (spatial models)");
    est->add_option("--wformat", ea.wformat, "triplet|groups|dense (default triplet)");
    est->add_flag("--standardize", ea.standardize, "row-standardize the weights after loading");
    est->add_flag("--cost", ea.cost, "cost frontier (default production)");
    est->add_option("--te-mode", ea.te_mode, "bc92|plain (accepts 'paper' for plain)");
    est->add_option("--log-x", ea.log_x, "input columns to log-transform")->delimiter(',');
    est->add_flag("--log-y", ea.log_y, "log-transform the output");
    est->add_flag("--pool", ea.pool, "pool T>1 panels for cross-sectional models");
    est->add_flag("--no-intercept", ea.no_intercept, "do not prepend an intercept column");
    est->add_option("--out", ea.out, "output directory")->required();

    WeightsArgs wa;
    auto* wts = app.add_subcommand("weights", "build a spatial weight matrix");
    wts->add_option("--coords", wa.coords, "CSV unit,x,y for k-nearest-neighbour weights");
    wts->add_option("--knn", wa.knn, "neighbour count for --coords");
    wts->add_option("--groups", wa.groups, "CSV unit,group for block-contiguity weights");
    wts->add_flag("--standardize", wa.standardize, "row-standardize");
    wts->add_option("--out", wa.out, "output directory")->required();

    SimulateArgs sa;
    auto* sim = app.add_subcommand("simulate", "simulate one panel from the experiment DGP");
    sim->add_option("--n", sa.n, "units")->required();
    sim->add_option("--t", sa.t, "periods (default 5)");
    sim->add_option("--rho", sa.rho, "spatial correlation")->required();
    sim->add_option("--eta", sa.eta, "decay parameter")->required();
    sim->add_option("--seed", sa.seed, "seed")->required();
    sim->add_option("--k-frac", sa.k_frac, "neighbour fraction (default 0.10)");
    sim->add_option("--v-spec", sa.v_spec, "literal|zero-mean|iid (default literal)");
    sim->add_option("--u-form", sa.u_form, "inverse|delta (default inverse)");
    sim->add_flag("--x-varying", sa.x_varying, "draw the regressor per (unit, period)");
    sim->add_option("--out", sa.out, "output directory")->required();

    McArgs ma;
    auto* mc = app.add_subcommand("mc", "replicated Monte Carlo experiment over a grid");
    mc->add_option("--n", ma.n, "sample sizes (default 100,200,400)")->delimiter(',');
    mc->add_option("--rho", ma.rho, "rho grid (default 0.05,0.2,0.4,0.6,0.8)")->delimiter(',');
    mc->add_option("--eta", ma.eta, "eta grid (default -0.1,-0.05,0,0.05,0.1)")->delimiter(',');
    mc->add_option("--reps", ma.reps, "replicates per cell (default 1000)");
    mc->add_option("--t", ma.t, "periods (default 5)");
    mc->add_option("--seed", ma.seed, "master seed")->required();
    mc->add_option("--v-spec", ma.v_spec, "literal|zero-mean|iid (default literal)");
    mc->add_option("--u-form", ma.u_form, "inverse|delta (default inverse)");
    mc->add_flag("--x-varying", ma.x_varying, "draw the regressor per (unit, period)");
    mc->add_option("--init", ma.init, "truth|data starting values (default truth)");
    mc->add_option("--model", ma.model, "fitted model (default stsfa-tv)");
    mc->add_option("--threads", ma.threads, "worker threads (default $STSFA_THREADS or 1)");
    mc->add_flag("--dump-estimates", ma.dump_estimates, "write per-replicate estimates.csv");
    mc->add_option("--out", ma.out, "output directory")->required();

    std::string replay_manifest, replay_out;
    auto* rp = app.add_subcommand("replay", "re-run a command from its manifest.json");
    rp->add_option("manifest", replay_manifest, "manifest.json path")->required();
    rp->add_option("--out", replay_out, "redirect outputs to this directory");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_invalid_input;
    }

    ManifestWriter manifest;
    manifest.argv = args;
    try {
        if (est->parsed()) {
            manifest.command = "estimate";
            if (ea.te_mode == "paper") ea.te_mode = "plain";
            if (ea.te_mode != "bc92" && ea.te_mode != "plain")
                throw stsfa::input_error("unknown --te-mode: " + ea.te_mode);
            return run_estimate(ea, std::move(manifest));
        }
        if (wts->parsed()) {
            manifest.command = "weights";
            return run_weights(wa, std::move(manifest));
        }
        if (sim->parsed()) {
            manifest.command = "simulate";
            return run_simulate(sa, std::move(manifest));
        }
        if (mc->parsed()) {
            manifest.command = "mc";
            return run_mc(ma, std::move(manifest));
        }
        return run_replay(replay_manifest, replay_out);
    } catch (const stsfa::alignment_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_misaligned_weights;
    } catch (const stsfa::numeric_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_nonfinite_likelihood;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_invalid_input;
    }
}

} // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return dispatch(args);
}
