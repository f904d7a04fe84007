#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

namespace stsfa {

using Objective = std::function<double(const Eigen::VectorXd&)>;

/// Coordinate box for the optimizer; +-infinity marks an unbounded side.
struct Box {
    Eigen::VectorXd lower, upper;

    static Box unbounded(int dim) {
        Box b;
        b.lower = Eigen::VectorXd::Constant(dim, -std::numeric_limits<double>::infinity());
        b.upper = Eigen::VectorXd::Constant(dim, std::numeric_limits<double>::infinity());
        return b;
    }

    Eigen::VectorXd clamp(Eigen::VectorXd x) const {
        for (int i = 0; i < x.size(); ++i) x[i] = std::min(upper[i], std::max(lower[i], x[i]));
        return x;
    }
};

struct MinimizeOptions {
    int max_iter = 2000;      // shared budget across both phases
    int simplex_budget = 150; // iterations granted to the localization phase
    double grad_tol = 1e-5;   // infinity norm of the projected gradient
    double step_tol = 1e-9;   // infinity norm of the accepted step
    double fd_rel_step = 5e-7;
};

enum class StopReason { gradient, step, max_iter };

struct MinimizeResult {
    Eigen::VectorXd x;
    double f = std::numeric_limits<double>::infinity();
    int iterations = 0;
    long n_eval = 0;
    StopReason reason = StopReason::max_iter;
    std::vector<bool> active_lower, active_upper; // bound contact at the solution
};

/// Central-difference gradient with per-coordinate step rel_step * (1 + |x_i|).
inline Eigen::VectorXd numeric_gradient(const Objective& f, const Eigen::VectorXd& x,
                                        double rel_step, long* n_eval = nullptr) {
    const int d = static_cast<int>(x.size());
    Eigen::VectorXd g(d), xp = x, xm = x;
    for (int i = 0; i < d; ++i) {
        const double h = rel_step * (1.0 + std::abs(x[i]));
        xp[i] = x[i] + h;
        xm[i] = x[i] - h;
        g[i] = (f(xp) - f(xm)) / (2.0 * h);
        xp[i] = x[i];
        xm[i] = x[i];
    }
    if (n_eval) *n_eval += 2 * d;
    return g;
}

namespace detail {

/// One Nelder-Mead pass with every trial point projected into the box.
/// Budgeted localization only; polishing is the quasi-Newton phase's job.
inline void nelder_mead(const Objective& f, const Box& box, Eigen::VectorXd& x_best,
                        double& f_best, int budget, int& iterations, long& n_eval) {
    const int d = static_cast<int>(x_best.size());
    std::vector<Eigen::VectorXd> v(d + 1);
    std::vector<double> fv(d + 1);
    v[0] = x_best;
    fv[0] = f_best;
    for (int i = 0; i < d; ++i) {
        Eigen::VectorXd p = x_best;
        const double step = std::max(0.05 * std::abs(p[i]), 0.025);
        p[i] += step;
        p = box.clamp(p);
        if ((p - v[0]).isZero()) p[i] = v[0][i] - step; // flipped when clamped onto the base point
        v[i + 1] = box.clamp(p);
        fv[i + 1] = f(v[i + 1]);
        ++n_eval;
    }

    auto order = [&] {
        std::vector<int> idx(d + 1);
        for (int i = 0; i <= d; ++i) idx[i] = i;
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return fv[a] < fv[b]; });
        std::vector<Eigen::VectorXd> v2(d + 1);
        std::vector<double> f2(d + 1);
        for (int i = 0; i <= d; ++i) {
            v2[i] = v[idx[i]];
            f2[i] = fv[idx[i]];
        }
        v.swap(v2);
        fv.swap(f2);
    };

    for (int it = 0; it < budget; ++it, ++iterations) {
        order();
        if (std::abs(fv[d] - fv[0]) <= 1e-13 * (1.0 + std::abs(fv[0]))) break;

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
        for (int i = 0; i < d; ++i) centroid += v[i];
        centroid /= d;

        auto eval = [&](double coef) {
            Eigen::VectorXd p = box.clamp(centroid + coef * (centroid - v[d]));
            return std::pair<Eigen::VectorXd, double>(p, (++n_eval, f(p)));
        };

        auto [xr, fr] = eval(1.0); // reflection
        if (fr < fv[0]) {
            auto [xe, fe] = eval(2.0); // expansion
            if (fe < fr) {
                v[d] = xe;
                fv[d] = fe;
            } else {
                v[d] = xr;
                fv[d] = fr;
            }
        } else if (fr < fv[d - 1]) {
            v[d] = xr;
            fv[d] = fr;
        } else {
            auto [xc, fc] = fr < fv[d] ? eval(0.5) : eval(-0.5); // contraction
            if (fc < std::min(fr, fv[d])) {
                v[d] = xc;
                fv[d] = fc;
            } else { // shrink toward the best vertex
                for (int i = 1; i <= d; ++i) {
                    v[i] = box.clamp(v[0] + 0.5 * (v[i] - v[0]));
                    fv[i] = f(v[i]);
                    ++n_eval;
                }
            }
        }
    }
    order();
    if (fv[0] < f_best) {
        f_best = fv[0];
        x_best = v[0];
    }
}

} // namespace detail

/// Minimize f over a box: short Nelder-Mead localization, then BFGS with
/// central-difference gradients, backtracking line search, and projection
/// onto the box. Deterministic for fixed inputs. Always returns the best
/// point seen.
inline MinimizeResult minimize(const Objective& f, const Eigen::VectorXd& x0, const Box& box,
                               const MinimizeOptions& opts = {}) {
    const int d = static_cast<int>(x0.size());
    MinimizeResult res;
    res.x = box.clamp(x0);
    res.f = f(res.x);
    res.n_eval = 1;

    if (opts.simplex_budget > 0)
        detail::nelder_mead(f, box, res.x, res.f, std::min(opts.simplex_budget, opts.max_iter),
                            res.iterations, res.n_eval);

    Eigen::MatrixXd h_inv = Eigen::MatrixXd::Identity(d, d);
    Eigen::VectorXd x = res.x;
    double fx = res.f;
    Eigen::VectorXd g = numeric_gradient(f, x, opts.fd_rel_step, &res.n_eval);

    auto projected_grad_norm = [&](const Eigen::VectorXd& xc, const Eigen::VectorXd& gc) {
        double nrm = 0.0;
        for (int i = 0; i < d; ++i) {
            double gi = gc[i];
            if (xc[i] <= box.lower[i] && gi > 0) gi = 0; // pushing outward at a bound
            if (xc[i] >= box.upper[i] && gi < 0) gi = 0;
            nrm = std::max(nrm, std::abs(gi));
        }
        return nrm;
    };

    res.reason = StopReason::max_iter;
    while (res.iterations < opts.max_iter) {
        ++res.iterations;
        if (projected_grad_norm(x, g) <= opts.grad_tol) {
            res.reason = StopReason::gradient;
            break;
        }
        Eigen::VectorXd dir = -h_inv * g;
        if (!dir.allFinite() || dir.dot(g) >= 0) {
            h_inv.setIdentity();
            dir = -g;
        }
        double step = 1.0;
        Eigen::VectorXd x_new;
        double f_new = std::numeric_limits<double>::infinity();
        const double slope = dir.dot(g);
        bool accepted = false;
        for (int ls = 0; ls < 45; ++ls) {
            x_new = box.clamp(x + step * dir);
            f_new = f(x_new);
            ++res.n_eval;
            if (std::isfinite(f_new) && f_new <= fx + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            // Line search exhausted: either converged into noise or the
            // curvature model went bad; one identity reset, then stop.
            if (h_inv.isIdentity(0.0)) {
                res.reason = StopReason::step;
                break;
            }
            h_inv.setIdentity();
            continue;
        }

        const Eigen::VectorXd s = x_new - x;
        if (s.lpNorm<Eigen::Infinity>() <= opts.step_tol) {
            if (f_new < fx) {
                x = x_new;
                fx = f_new;
            }
            res.reason = StopReason::step;
            break;
        }
        Eigen::VectorXd g_new = numeric_gradient(f, x_new, opts.fd_rel_step, &res.n_eval);
        const Eigen::VectorXd yv = g_new - g;
        const double sy = s.dot(yv);
        if (sy > 1e-10 * s.norm() * yv.norm()) {
            // Sherman-Morrison form of the inverse BFGS update.
            const Eigen::VectorXd hy = h_inv * yv;
            const double yhy = yv.dot(hy);
            h_inv += ((sy + yhy) / (sy * sy)) * (s * s.transpose()) -
                     (hy * s.transpose() + s * hy.transpose()) / sy;
        }
        x = x_new;
        fx = f_new;
        g = g_new;
        if (fx < res.f) {
            res.f = fx;
            res.x = x;
        }
    }

    if (fx < res.f) {
        res.f = fx;
        res.x = x;
    }
    res.active_lower.assign(d, false);
    res.active_upper.assign(d, false);
    for (int i = 0; i < d; ++i) {
        res.active_lower[i] = res.x[i] <= box.lower[i] + 1e-12 * (1 + std::abs(box.lower[i]));
        res.active_upper[i] = res.x[i] >= box.upper[i] - 1e-12 * (1 + std::abs(box.upper[i]));
    }
    return res;
}

} // namespace stsfa
