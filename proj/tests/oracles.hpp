// Test-only reference implementations, kept independent of the code paths
// they check.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

namespace oracle {

inline double phi(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI); }
inline double Phi(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// AS 241 (PPND16) inverse standard normal CDF, ~1e-15 relative accuracy.
inline double norm_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw std::domain_error("norm_quantile: p outside (0,1)");
    const double q = p - 0.5;
    if (std::abs(q) <= 0.425) {
        const double r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                     6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                   1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
                 1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                     3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                   5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
                 4.2313330701600911252e1) * r + 1.0);
    }
    double r = q < 0.0 ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double x;
    if (r <= 5.0) {
        r -= 1.6;
        x = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
              4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
              2.05319162663775882187e0) * r + 1.0);
    } else {
        r -= 5.0;
        x = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
              5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
    }
    return q < 0.0 ? -x : x;
}

/// Classic cross-sectional normal-half-normal log density in the
/// lambda parameterization: ln f(e) = ln(2/s) + ln phi(e/s) + ln Phi(-sign e lambda / s).
inline double als77_logpdf(double eps, double sigma2_v, double sigma2_u, int sign) {
    const double s2 = sigma2_v + sigma2_u;
    const double s = std::sqrt(s2);
    const double lambda = std::sqrt(sigma2_u / sigma2_v);
    return std::log(2.0 / s) + std::log(phi(eps / s)) + std::log(Phi(-sign * eps * lambda / s));
}

/// Direct per-unit marginal log density of the time-varying model, written
/// straight off the closed form with plain Phi and no algebraic rearranging.
inline double tv_marginal_logpdf(const Eigen::VectorXd& eps, const Eigen::VectorXd& h,
                                 double delta_i, double sigma2_v, double sigma2_u, int sign) {
    const int t = static_cast<int>(eps.size());
    const double q = sigma2_u / (delta_i * delta_i);
    const double hh = h.squaredNorm();
    const double denom = sigma2_v + hh * q;
    const double mu = -sign * h.dot(eps) * q / denom;
    const double s2s = q * sigma2_v / denom;
    return std::log(2.0) + std::log(1.0 - Phi(-mu / std::sqrt(s2s))) -
           0.5 * t * std::log(2.0 * M_PI) - (t - 1) * std::log(std::sqrt(sigma2_v)) -
           0.5 * std::log(denom) - eps.squaredNorm() / (2.0 * sigma2_v) + mu * mu / (2.0 * s2s);
}

/// E[exp(-a Z)] for Z ~ N(mu, sd^2) truncated to Z > 0, by inverse-CDF
/// sampling: every draw is accepted, so `draws` is the exact sample size.
inline double trunc_normal_exp_moment_sample(double mu, double sd, double a, long draws,
                                             unsigned seed) {
    std::mt19937_64 gen(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double p0 = Phi(-mu / sd);
    double acc = 0.0;
    for (long i = 0; i < draws; ++i) {
        const double p = p0 + (1.0 - p0) * unif(gen);
        const double z = mu + sd * norm_quantile(std::min(p, 1.0 - 1e-16));
        acc += std::exp(-a * z);
    }
    return acc / static_cast<double>(draws);
}

/// Same moment by plain rejection sampling of the untruncated normal.
inline double trunc_normal_exp_moment_reject(double mu, double sd, double a, long draws,
                                             unsigned seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(mu, sd);
    double acc = 0.0;
    long kept = 0;
    for (long i = 0; i < draws; ++i) {
        const double z = normal(gen);
        if (z > 0.0) {
            acc += std::exp(-a * z);
            ++kept;
        }
    }
    if (kept == 0) throw std::runtime_error("rejection sampler kept nothing");
    return acc / static_cast<double>(kept);
}

/// All-pairs k nearest neighbours, ties broken toward the lower index.
inline std::vector<std::vector<int>> brute_force_knn(const std::vector<double>& xs,
                                                     const std::vector<double>& ys, int k) {
    const int n = static_cast<int>(xs.size());
    std::vector<std::vector<int>> out(n);
    for (int i = 0; i < n; ++i) {
        std::vector<std::pair<double, int>> d;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            const double dx = xs[j] - xs[i], dy = ys[j] - ys[i];
            d.push_back({std::sqrt(dx * dx + dy * dy), j});
        }
        std::sort(d.begin(), d.end());
        for (int q = 0; q < k; ++q) out[i].push_back(d[q].second);
        std::sort(out[i].begin(), out[i].end());
    }
    return out;
}

/// Central finite differences with a fixed relative step of 1e-6.
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x) {
    Eigen::VectorXd g(x.size());
    for (int i = 0; i < x.size(); ++i) {
        const double h = 1e-6 * (1.0 + std::abs(x[i]));
        Eigen::VectorXd xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        g[i] = (f(xp) - f(xm)) / (2.0 * h);
    }
    return g;
}

} // namespace oracle
