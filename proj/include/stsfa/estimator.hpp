#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "stsfa/errors.hpp"
#include "stsfa/frontier.hpp"
#include "stsfa/optim.hpp"
#include "stsfa/panel.hpp"
#include "stsfa/weights.hpp"

namespace stsfa {

enum class Temporal { cross_section, time_invariant, time_varying };

/// Which of the six model variants to fit and how to score efficiency.
struct ModelSpec {
    Temporal temporal = Temporal::time_invariant;
    bool spatial = false;
    FrontierSign sign = FrontierSign::production();
    TeMode te_mode = TeMode::bc92;
    bool pool = false; // allow cross_section on T > 1 data by pooling rows
};

/// Natural-coordinate parameters of any variant. rho is meaningful only for
/// spatial specs, eta only for time-varying ones.
struct ParamVector {
    Eigen::VectorXd beta;
    double sigma2_v = 1.0;
    double sigma2_u = 1.0;
    double rho = 0.0;
    double eta = 0.0;
};

enum class Convergence { converged, max_iter, boundary };

struct StdErrors {
    std::vector<std::string> names;
    Eigen::VectorXd values;   // NaN where status != 'e'
    std::vector<char> status; // 'e' estimated, 'b' at boundary, 'f' fixed by caller
    bool used_pseudo_inverse = false;
};

struct FitOptions {
    int max_iter = 2000;
    double grad_tol = 1e-5;
    double step_tol = 1e-9;
    int simplex_budget = 150;
    std::optional<ParamVector> init; // overrides the data-driven start
    std::optional<double> fix_rho;   // estimate with rho pinned
    std::optional<double> fix_eta;   // estimate with eta pinned
    bool std_errors = true;
    bool efficiency = true;
};

struct FitResult {
    ModelSpec spec;
    ParamVector params;
    StdErrors std_errors;
    double loglik = 0.0;
    double aic = 0.0;
    Eigen::MatrixXd efficiency; // N x T of the original data
    Convergence convergence = Convergence::max_iter;
    int iterations = 0;
    ParamVector init;
    int k_free = 0;
};

inline double aic(double loglik, int k) {
    if (k < 1) throw input_error("aic: need at least one free parameter");
    return -2.0 * loglik + 2.0 * static_cast<double>(k);
}

namespace detail {

/// Mapping between natural parameters and the unconstrained coordinates the
/// optimizer works in: identity for beta and eta, log for the variances,
/// scaled atanh for rho. Pinned parameters are dropped from the free vector.
class ParamPacker {
public:
    ParamPacker(int p, const ModelSpec& spec, double rho_b, const FitOptions& opts)
        : p_(p), spatial_(spec.spatial), tv_(spec.temporal == Temporal::time_varying),
          rho_b_(rho_b), fix_rho_(opts.fix_rho), fix_eta_(opts.fix_eta) {}

    int dim() const {
        return p_ + 2 + (spatial_ && !fix_rho_ ? 1 : 0) + (tv_ && !fix_eta_ ? 1 : 0);
    }

    Eigen::VectorXd pack(const ParamVector& pv) const {
        if (!(pv.sigma2_v > 0.0)) throw input_error("transform: sigma2_v must be positive");
        if (!(pv.sigma2_u >= 0.0)) throw input_error("transform: sigma2_u must be nonnegative");
        Eigen::VectorXd x(dim());
        x.head(p_) = pv.beta;
        x[p_] = std::log(pv.sigma2_v);
        x[p_ + 1] = std::log(std::max(pv.sigma2_u, std::exp(var_lo)));
        int k = p_ + 2;
        if (spatial_ && !fix_rho_) {
            if (std::abs(pv.rho) >= rho_b_)
                throw input_error("transform: rho outside admissible range (|rho| < " +
                                  format_double(rho_b_) + ")");
            x[k++] = std::atanh(pv.rho / rho_b_);
        }
        if (tv_ && !fix_eta_) x[k++] = pv.eta;
        return x;
    }

    ParamVector unpack(const Eigen::VectorXd& x) const {
        ParamVector pv;
        pv.beta = x.head(p_);
        pv.sigma2_v = std::exp(x[p_]);
        pv.sigma2_u = std::exp(x[p_ + 1]);
        int k = p_ + 2;
        if (spatial_) pv.rho = fix_rho_ ? *fix_rho_ : rho_b_ * std::tanh(x[k++]);
        if (tv_) pv.eta = fix_eta_ ? *fix_eta_ : x[k++];
        return pv;
    }

    Box box() const {
        Box b = Box::unbounded(dim());
        b.lower[p_] = var_lo;
        b.upper[p_] = var_hi;
        b.lower[p_ + 1] = var_lo;
        b.upper[p_ + 1] = var_hi;
        int k = p_ + 2;
        if (spatial_ && !fix_rho_) {
            b.lower[k] = -18.0;
            b.upper[k] = 18.0;
            ++k;
        }
        if (tv_ && !fix_eta_) {
            b.lower[k] = -30.0;
            b.upper[k] = 30.0;
        }
        return b;
    }

    /// Coordinates whose bound contact means a variance or spatial parameter
    /// pinned at the edge of its domain.
    bool boundary_hit(const MinimizeResult& r) const {
        for (int j : {p_, p_ + 1})
            if (r.active_lower[j] || r.active_upper[j]) return true;
        int k = p_ + 2;
        if (spatial_ && !fix_rho_) {
            if (r.active_lower[k] || r.active_upper[k]) return true;
            ++k;
        }
        if (tv_ && !fix_eta_ && (r.active_lower[k] || r.active_upper[k])) return true;
        return false;
    }

    static constexpr double var_lo = -34.5; // sigma^2 floor ~1e-15
    static constexpr double var_hi = 34.5;

private:
    int p_;
    bool spatial_, tv_;
    double rho_b_;
    std::optional<double> fix_rho_, fix_eta_;
};

/// Pool an N x T panel into an (N*T) x 1 pseudo cross-section.
inline PanelDataset pool_panel(const PanelDataset& ds) {
    PanelDataset out;
    out.time_ids = {"1"};
    out.column_names = ds.column_names;
    const int n = ds.n_units(), t = ds.n_periods();
    out.y.resize(n * t, 1);
    out.x.assign(ds.x.size(), Eigen::MatrixXd(n * t, 1));
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < t; ++j) {
            out.unit_ids.push_back(ds.unit_ids[i] + "@" + ds.time_ids[j]);
            out.y(i * t + j, 0) = ds.y(i, j);
            for (std::size_t p = 0; p < ds.x.size(); ++p) out.x[p](i * t + j, 0) = ds.x[p](i, j);
        }
    }
    return out;
}

inline void check_alignment(const PanelDataset& ds, const SpatialWeights& w) {
    if (w.n != ds.n_units())
        throw alignment_error("weights cover " + std::to_string(w.n) + " units, data has " +
                              std::to_string(ds.n_units()));
    if (w.unit_ids.empty()) return;
    std::string mismatches;
    int shown = 0;
    for (int i = 0; i < ds.n_units(); ++i) {
        if (w.unit_ids[i] != ds.unit_ids[i] && shown < 5) {
            mismatches += " [" + std::to_string(i) + "] data='" + ds.unit_ids[i] + "' weights='" +
                          w.unit_ids[i] + "'";
            ++shown;
        }
    }
    if (!mismatches.empty())
        throw alignment_error("weights unit order does not match data:" + mismatches);
}

inline double loglik_natural(const ModelSpec& spec, const PanelDataset& ds,
                             const SpatialWeights* w, const ParamVector& pv) {
    std::vector<double> d =
        spec.spatial ? delta(*w, pv.rho) : std::vector<double>(ds.n_units(), 1.0);
    const Eigen::MatrixXd eps = residuals(ds.y, ds.x, pv.beta);
    const VarianceParams vp{pv.sigma2_v, pv.sigma2_u};
    if (spec.temporal == Temporal::time_varying)
        return loglik_time_varying(eps, DecayProfile::make(pv.eta, ds.n_periods()), d, vp,
                                   spec.sign);
    return loglik_time_invariant(eps, d, vp, spec.sign);
}

} // namespace detail

/// Moran's I of a vector under W: (N / S0) * (r'Wr) / (r'r), r centered.
inline double morans_i(const SpatialWeights& w, const Eigen::VectorXd& values) {
    Eigen::VectorXd r = values.array() - values.mean();
    const double s0 = [&] {
        double s = 0;
        for (const auto& t : w.entries) s += t.value;
        return s;
    }();
    const double rr = r.squaredNorm();
    if (s0 <= 0.0 || rr <= 0.0) return 0.0;
    return (static_cast<double>(w.n) / s0) * r.dot(w.apply(r)) / rr;
}

/// Data-driven starting point: pooled OLS for beta, a corrected-OLS
/// third-moment split of the residual variance for the variances (50/50 split
/// when the residual skew contradicts the frontier direction), Moran's I of
/// the unit-mean residuals for rho, and zero for eta.
inline ParamVector initialize(const ModelSpec& spec, const PanelDataset& ds,
                              const SpatialWeights* w) {
    const int n = ds.n_units(), t = ds.n_periods(), p = ds.n_inputs();
    Eigen::MatrixXd design(n * t, p);
    for (int c = 0; c < p; ++c)
        design.col(c) = Eigen::Map<const Eigen::VectorXd>(ds.x[c].data(), n * t);
    Eigen::VectorXd yv = Eigen::Map<const Eigen::VectorXd>(ds.y.data(), n * t);

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
        std::string cols;
        const auto perm = qr.colsPermutation().indices();
        for (int j = qr.rank(); j < p; ++j) cols += " '" + ds.column_names[perm[j]] + "'";
        throw input_error("initialize: collinear input columns, cannot identify:" + cols);
    }
    ParamVector pv;
    pv.beta = qr.solve(yv);

    Eigen::VectorXd e = yv - design * pv.beta;
    Eigen::ArrayXd ec = e.array() - e.mean();
    const double m2 = ec.square().mean();
    const double m3 = ec.cube().mean();
    if (m2 < 1e-300) {
        pv.sigma2_v = pv.sigma2_u = 1e-12;
    } else if (spec.sign.s * m3 >= 0.0) {
        pv.sigma2_v = pv.sigma2_u = 0.5 * m2; // wrong-skew fallback
    } else {
        const double c3 = std::sqrt(2.0 / pi) * (4.0 / pi - 1.0);
        const double su3 = -spec.sign.s * m3 / c3;
        pv.sigma2_u = std::pow(su3, 2.0 / 3.0);
        pv.sigma2_v = m2 - (1.0 - 2.0 / pi) * pv.sigma2_u;
        pv.sigma2_u = std::max(pv.sigma2_u, 1e-8 * m2);
        pv.sigma2_v = std::max(pv.sigma2_v, 0.05 * m2);
    }

    if (spec.spatial) {
        Eigen::MatrixXd eps_mat =
            Eigen::Map<const Eigen::MatrixXd>(e.data(), n, t); // same layout as ds.y
        const double b = rho_bound(*w);
        pv.rho = std::clamp(morans_i(*w, eps_mat.rowwise().mean()), -0.95 * b, 0.95 * b);
    }
    pv.eta = 0.0;
    return pv;
}

/// Central-difference Hessian of the log-likelihood in natural coordinates,
/// inverted to the usual asymptotic standard errors. Parameters within 1e-6
/// of a domain bound are reported as boundary markers and held fixed during
/// differencing. A Hessian that is not negative definite falls back to a
/// pseudo-inverse and flags it.
inline StdErrors hessian_std_errors(const std::function<double(const Eigen::VectorXd&)>& loglik,
                                    const Eigen::VectorXd& at, std::vector<std::string> names,
                                    std::vector<char> status) {
    const int d = static_cast<int>(at.size());
    StdErrors se;
    se.names = std::move(names);
    se.status = std::move(status);
    se.values = Eigen::VectorXd::Constant(d, std::numeric_limits<double>::quiet_NaN());

    std::vector<int> free_idx;
    for (int i = 0; i < d; ++i)
        if (se.status[i] == 'e') free_idx.push_back(i);
    const int m = static_cast<int>(free_idx.size());
    if (m == 0) return se;

    auto eval = [&](const Eigen::VectorXd& xfree) {
        Eigen::VectorXd full = at;
        for (int i = 0; i < m; ++i) full[free_idx[i]] = xfree[i];
        return loglik(full);
    };
    Eigen::VectorXd x0(m), h(m);
    for (int i = 0; i < m; ++i) {
        x0[i] = at[free_idx[i]];
        h[i] = 1e-4 * std::max(1.0, std::abs(x0[i]));
    }
    const double f0 = eval(x0);
    Eigen::MatrixXd hess(m, m);
    for (int i = 0; i < m; ++i) {
        Eigen::VectorXd xp = x0, xm = x0;
        xp[i] += h[i];
        xm[i] -= h[i];
        hess(i, i) = (eval(xp) - 2.0 * f0 + eval(xm)) / (h[i] * h[i]);
        for (int j = i + 1; j < m; ++j) {
            Eigen::VectorXd xpp = x0, xpm = x0, xmp = x0, xmm = x0;
            xpp[i] += h[i]; xpp[j] += h[j];
            xpm[i] += h[i]; xpm[j] -= h[j];
            xmp[i] -= h[i]; xmp[j] += h[j];
            xmm[i] -= h[i]; xmm[j] -= h[j];
            hess(i, j) = hess(j, i) =
                (eval(xpp) - eval(xpm) - eval(xmp) + eval(xmm)) / (4.0 * h[i] * h[j]);
        }
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(-hess);
    Eigen::MatrixXd cov;
    const double lam_min = eig.eigenvalues().minCoeff();
    const double lam_max = eig.eigenvalues().maxCoeff();
    if (lam_min > 1e-12 * std::max(1.0, lam_max)) {
        cov = eig.eigenvectors() * eig.eigenvalues().cwiseInverse().asDiagonal() *
              eig.eigenvectors().transpose();
    } else {
        se.used_pseudo_inverse = true;
        Eigen::VectorXd inv = eig.eigenvalues();
        for (int i = 0; i < m; ++i)
            inv[i] = std::abs(inv[i]) > 1e-10 * std::max(1.0, std::abs(lam_max)) ? 1.0 / inv[i] : 0.0;
        cov = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
    }
    for (int i = 0; i < m; ++i) {
        const double v = cov(i, i);
        se.values[free_idx[i]] = v > 0.0 ? std::sqrt(v) : std::numeric_limits<double>::quiet_NaN();
    }
    return se;
}

/// Efficiency scores for fitted parameters, using the variant's moment and
/// scoring formulas. Shape N x T of the data passed in.
inline Eigen::MatrixXd efficiency_scores(const ModelSpec& spec, const ParamVector& pv,
                                         const PanelDataset& ds, const SpatialWeights* w) {
    std::vector<double> d =
        spec.spatial ? delta(*w, pv.rho) : std::vector<double>(ds.n_units(), 1.0);
    const Eigen::MatrixXd eps = residuals(ds.y, ds.x, pv.beta);
    const VarianceParams vp{pv.sigma2_v, pv.sigma2_u};
    if (spec.temporal == Temporal::time_varying) {
        const DecayProfile decay = DecayProfile::make(pv.eta, ds.n_periods());
        return technical_efficiency_tv(posterior_moments_tv(eps, decay, d, vp, spec.sign), decay,
                                       spec.te_mode);
    }
    const PosteriorMoments pm =
        posterior_moments_ti(eps.rowwise().mean(), d, vp, ds.n_periods(), spec.sign);
    return technical_efficiency_ti(pm).replicate(1, ds.n_periods());
}

inline int free_param_count(const ModelSpec& spec, int p, const FitOptions& opts = {}) {
    int k = p + 2;
    if (spec.spatial && !opts.fix_rho) k += 1;
    if (spec.temporal == Temporal::time_varying && !opts.fix_eta) k += 1;
    return k;
}

/// Maximum-likelihood fit of the requested variant. Deterministic for fixed
/// inputs and options; the returned log-likelihood never falls below the
/// starting point's.
inline FitResult fit(const ModelSpec& spec, const PanelDataset& data, const SpatialWeights* w,
                     const FitOptions& opts = {}) {
    if (spec.spatial && w == nullptr) throw input_error("fit: spatial model needs a weight matrix");
    if (!spec.spatial && w != nullptr)
        throw input_error("fit: weight matrix supplied for a non-spatial model");
    if (spec.temporal == Temporal::cross_section && data.n_periods() > 1 && !spec.pool)
        throw input_error("fit: cross-sectional model on T>1 data requires pooling");

    const bool pooled = spec.temporal == Temporal::cross_section && data.n_periods() > 1;
    const PanelDataset ds = pooled ? detail::pool_panel(data) : data;
    if (spec.spatial) detail::check_alignment(pooled ? ds : data, *w);

    const int p = ds.n_inputs();
    const double rho_b = spec.spatial ? rho_bound(*w) : 1.0;
    detail::ParamPacker packer(p, spec, rho_b, opts);

    FitResult out;
    out.spec = spec;
    out.init = opts.init ? *opts.init : initialize(spec, ds, w);
    if (opts.fix_rho) out.init.rho = *opts.fix_rho;
    if (opts.fix_eta) out.init.eta = *opts.fix_eta;
    if (spec.temporal != Temporal::time_varying) out.init.eta = 0.0;
    if (!spec.spatial) out.init.rho = 0.0;

    auto objective = [&](const Eigen::VectorXd& x) {
        const ParamVector pv = packer.unpack(x);
        if (!pv.beta.allFinite() || !std::isfinite(pv.sigma2_v) || !std::isfinite(pv.sigma2_u) ||
            !std::isfinite(pv.eta))
            return std::numeric_limits<double>::infinity();
        const double ll = detail::loglik_natural(spec, ds, w, pv);
        return std::isfinite(ll) ? -ll : std::numeric_limits<double>::infinity();
    };

    const Eigen::VectorXd x0 = packer.pack(out.init);
    if (!std::isfinite(objective(x0)))
        throw numeric_error("fit: log-likelihood is not finite at the starting values");

    MinimizeOptions mo;
    mo.max_iter = opts.max_iter;
    mo.grad_tol = opts.grad_tol;
    mo.step_tol = opts.step_tol;
    mo.simplex_budget = opts.simplex_budget;
    const MinimizeResult mr = minimize(objective, x0, packer.box(), mo);

    out.params = packer.unpack(mr.x);
    out.loglik = -mr.f;
    out.iterations = mr.iterations;
    out.k_free = free_param_count(spec, p, opts);
    out.aic = aic(out.loglik, out.k_free);
    if (mr.reason == StopReason::max_iter)
        out.convergence = Convergence::max_iter;
    else
        out.convergence = packer.boundary_hit(mr) ? Convergence::boundary : Convergence::converged;

    if (opts.std_errors) {
        std::vector<std::string> names(ds.column_names.begin(), ds.column_names.end());
        names.push_back("sigma2_v");
        names.push_back("sigma2_u");
        if (spec.spatial) names.push_back("rho");
        if (spec.temporal == Temporal::time_varying) names.push_back("eta");

        Eigen::VectorXd nat(names.size());
        nat.head(p) = out.params.beta;
        nat[p] = out.params.sigma2_v;
        nat[p + 1] = out.params.sigma2_u;
        int k = p + 2;
        if (spec.spatial) nat[k++] = out.params.rho;
        if (spec.temporal == Temporal::time_varying) nat[k++] = out.params.eta;

        std::vector<char> status(names.size(), 'e');
        if (out.params.sigma2_v <= 1e-6) status[p] = 'b';
        if (out.params.sigma2_u <= 1e-6) status[p + 1] = 'b';
        k = p + 2;
        if (spec.spatial) {
            if (opts.fix_rho) status[k] = 'f';
            else if (std::abs(out.params.rho) >= rho_b - 1e-6) status[k] = 'b';
            ++k;
        }
        if (spec.temporal == Temporal::time_varying && opts.fix_eta) status[k] = 'f';

        auto ll_nat = [&](const Eigen::VectorXd& th) {
            ParamVector pv;
            pv.beta = th.head(p);
            pv.sigma2_v = th[p];
            pv.sigma2_u = th[p + 1];
            int j = p + 2;
            if (spec.spatial) pv.rho = th[j++];
            if (spec.temporal == Temporal::time_varying) pv.eta = th[j++];
            if (!(pv.sigma2_v > 0.0) || pv.sigma2_u < 0.0 || std::abs(pv.rho) >= rho_b)
                return -std::numeric_limits<double>::infinity();
            return detail::loglik_natural(spec, ds, w, pv);
        };
        out.std_errors = hessian_std_errors(ll_nat, nat, std::move(names), std::move(status));
    }

    if (opts.efficiency) {
        Eigen::MatrixXd te = efficiency_scores(spec, out.params, ds, w);
        if (pooled) {
            out.efficiency.resize(data.n_units(), data.n_periods());
            for (int i = 0; i < data.n_units(); ++i)
                for (int j = 0; j < data.n_periods(); ++j)
                    out.efficiency(i, j) = te(i * data.n_periods() + j, 0);
        } else {
            out.efficiency = te;
        }
    }
    return out;
}

} // namespace stsfa
