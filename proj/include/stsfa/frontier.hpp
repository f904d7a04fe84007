#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "stsfa/normal.hpp"

namespace stsfa {

/// Noise variance and pre-spatial half-normal inefficiency scale.
struct VarianceParams {
    double sigma2_v = 1.0; // > 0
    double sigma2_u = 1.0; // >= 0
};

/// Conditional moments of the one-sided inefficiency given the composite
/// residuals: the inefficiency is truncated-normal (mu_star_i, sigma2_star_i)
/// on the positive half-line. sigma2_star is per unit because the spatial
/// attenuation can differ across units.
struct PosteriorMoments {
    Eigen::VectorXd mu_star;     // N
    Eigen::VectorXd sigma2_star; // N
};

/// Temporal pattern of inefficiency: values[t] = exp(-eta * (t+1 - T)) for
/// t = 0..T-1, one exactly in the final period. Positive eta means
/// inefficiency shrinks toward the last period, negative means it grows,
/// zero holds it flat.
struct DecayProfile {
    double eta = 0.0;
    Eigen::VectorXd values; // T

    static DecayProfile make(double eta, int t_periods) {
        if (t_periods < 1) throw std::invalid_argument("decay: need at least one period");
        DecayProfile d;
        d.eta = eta;
        d.values.resize(t_periods);
        for (int t = 0; t < t_periods; ++t)
            d.values[t] = std::exp(eta * static_cast<double>(t_periods - 1 - t));
        return d;
    }
};

/// +1 for production frontiers, -1 for cost frontiers.
struct FrontierSign {
    int s = +1;

    static FrontierSign production() { return {+1}; }
    static FrontierSign cost() { return {-1}; }
};

/// Composite residuals eps_it = y_it - x_it' beta, shape N x T.
inline Eigen::MatrixXd residuals(const Eigen::MatrixXd& y,
                                 const std::vector<Eigen::MatrixXd>& x,
                                 const Eigen::VectorXd& beta) {
    if (static_cast<int>(x.size()) != beta.size())
        throw std::invalid_argument("residuals: beta length does not match input count");
    Eigen::MatrixXd eps = y;
    for (std::size_t p = 0; p < x.size(); ++p) eps -= beta[static_cast<int>(p)] * x[p];
    return eps;
}

namespace detail {

inline void check_delta(const std::vector<double>& d) {
    for (double v : d)
        if (!(v > 0.0)) throw std::domain_error("frontier: non-positive attenuation delta");
}

inline void check_variances(const VarianceParams& vp) {
    if (!(vp.sigma2_v > 0.0) || !std::isfinite(vp.sigma2_v))
        throw std::domain_error("frontier: sigma2_v must be positive and finite");
    if (!(vp.sigma2_u >= 0.0) || !std::isfinite(vp.sigma2_u))
        throw std::domain_error("frontier: sigma2_u must be nonnegative and finite");
}

} // namespace detail

/// Truncated-normal posterior moments under an arbitrary temporal profile h:
///   mu_star_i     = -s (h'eps_i) q_i / (sigma2_v + (h'h) q_i)
///   sigma2_star_i =  q_i sigma2_v   / (sigma2_v + (h'h) q_i)
/// with q_i = sigma2_u / delta_i^2. The time-invariant case is h = ones.
inline PosteriorMoments posterior_moments_profile(const Eigen::VectorXd& h_eps, double hh,
                                                  const std::vector<double>& delta,
                                                  const VarianceParams& vp, FrontierSign sign) {
    detail::check_delta(delta);
    detail::check_variances(vp);
    const int n = static_cast<int>(delta.size());
    PosteriorMoments pm;
    pm.mu_star.resize(n);
    pm.sigma2_star.resize(n);
    if (vp.sigma2_u == 0.0) {
        pm.mu_star.setZero();
        pm.sigma2_star.setZero();
        return pm;
    }
    for (int i = 0; i < n; ++i) {
        const double q = vp.sigma2_u / (delta[i] * delta[i]);
        const double denom = vp.sigma2_v + hh * q;
        pm.mu_star[i] = -sign.s * h_eps[i] * q / denom;
        pm.sigma2_star[i] = q * vp.sigma2_v / denom;
    }
    return pm;
}

/// Time-invariant moments from per-unit mean residuals.
inline PosteriorMoments posterior_moments_ti(const Eigen::VectorXd& eps_bar,
                                             const std::vector<double>& delta,
                                             const VarianceParams& vp, int t_periods,
                                             FrontierSign sign) {
    if (t_periods < 1) throw std::invalid_argument("moments: need at least one period");
    const double t = static_cast<double>(t_periods);
    return posterior_moments_profile(t * eps_bar, t, delta, vp, sign);
}

/// Time-varying moments from the full residual matrix and a decay profile.
inline PosteriorMoments posterior_moments_tv(const Eigen::MatrixXd& eps, const DecayProfile& decay,
                                             const std::vector<double>& delta,
                                             const VarianceParams& vp, FrontierSign sign) {
    if (eps.cols() != decay.values.size())
        throw std::invalid_argument("moments: decay length does not match periods");
    return posterior_moments_profile(eps * decay.values, decay.values.squaredNorm(), delta, vp,
                                     sign);
}

namespace detail {

/// Shared likelihood kernel for profile h (ones for the time-invariant case).
///
/// Per unit the marginal density of eps_i contributes
///   ln2 - T/2 ln(2 pi) - (T-1)/2 ln sigma2_v - 1/2 ln(sigma2_v + h'h q_i)
///   + ln[1 - Phi(-mu_i / s_i)] - eps_i'eps_i / (2 sigma2_v) + mu_i^2 / (2 s_i^2).
///
/// The last two terms are evaluated in the algebraically equal form
///   -RSS_i / (2 sigma2_v) - (h'eps_i)^2 / (2 h'h (sigma2_v + h'h q_i)),
/// RSS_i = eps_i'eps_i - (h'eps_i)^2 / h'h, which stays finite-precision when
/// sigma2_v is orders of magnitude below the residual scale (the raw form is
/// a difference of two near-equal large numbers there).
inline double loglik_profile(const Eigen::MatrixXd& eps, const Eigen::VectorXd& h,
                             const std::vector<double>& delta, const VarianceParams& vp,
                             FrontierSign sign) {
    check_delta(delta);
    check_variances(vp);
    const int n = static_cast<int>(eps.rows());
    const int t = static_cast<int>(eps.cols());
    if (static_cast<int>(delta.size()) != n)
        throw std::invalid_argument("loglik: delta length does not match units");
    if (h.size() != t) throw std::invalid_argument("loglik: profile length does not match periods");
    const double s2v = vp.sigma2_v;

    if (vp.sigma2_u == 0.0) {
        // Pure-noise limit: a Gaussian likelihood of the pooled residuals.
        return -0.5 * n * t * (ln_2pi + std::log(s2v)) - eps.squaredNorm() / (2.0 * s2v);
    }

    const double hh = h.squaredNorm();
    const Eigen::VectorXd h_eps = eps * h;
    double ll = n * std::log(2.0) - 0.5 * n * t * ln_2pi - 0.5 * n * (t - 1) * std::log(s2v);
    for (int i = 0; i < n; ++i) {
        const double q = vp.sigma2_u / (delta[i] * delta[i]);
        const double denom = s2v + hh * q;
        const double rss = std::max(0.0, eps.row(i).squaredNorm() - h_eps[i] * h_eps[i] / hh);
        // mu_i / s_i without forming the near-zero pieces separately
        const double ratio = -sign.s * h_eps[i] * std::sqrt(q / (s2v * denom));
        ll += -0.5 * std::log(denom) + std_normal_log_cdf_complement(-ratio) -
              rss / (2.0 * s2v) - h_eps[i] * h_eps[i] / (2.0 * hh * denom);
    }
    return ll;
}

} // namespace detail

/// Log-likelihood of the time-invariant model for an N x T residual matrix.
inline double loglik_time_invariant(const Eigen::MatrixXd& eps, const std::vector<double>& delta,
                                    const VarianceParams& vp, FrontierSign sign) {
    return detail::loglik_profile(eps, Eigen::VectorXd::Ones(eps.cols()), delta, vp, sign);
}

/// Log-likelihood of the time-varying model; collapses to the time-invariant
/// value when decay.eta == 0.
inline double loglik_time_varying(const Eigen::MatrixXd& eps, const DecayProfile& decay,
                                  const std::vector<double>& delta, const VarianceParams& vp,
                                  FrontierSign sign) {
    return detail::loglik_profile(eps, decay.values, delta, vp, sign);
}

namespace detail {

/// E[exp(-a Z)] for Z ~ N(mu, s2) truncated to Z > 0, in log space:
///   [1 - Phi(a s - mu/s)] / [1 - Phi(-mu/s)] * exp(-a mu + a^2 s2 / 2).
/// The s -> 0 limit is exp(-a max(mu, 0)): the truncated mass collapses onto
/// max(mu, 0).
inline double trunc_normal_exp_moment(double mu, double s2, double a) {
    if (s2 <= 0.0) return std::exp(-a * std::max(mu, 0.0));
    const double s = std::sqrt(s2);
    const double r = mu / s;
    const double log_te = std_normal_log_cdf_complement(a * s - r) -
                          std_normal_log_cdf_complement(-r) - a * mu + 0.5 * a * a * s2;
    return std::min(1.0, std::exp(log_te));
}

} // namespace detail

/// Technical efficiency of each unit under time-invariant inefficiency,
/// constant across periods. Strictly inside (0,1) when sigma2_u > 0; exactly
/// one in the no-inefficiency limit.
inline Eigen::VectorXd technical_efficiency_ti(const PosteriorMoments& pm) {
    const int n = static_cast<int>(pm.mu_star.size());
    Eigen::VectorXd te(n);
    for (int i = 0; i < n; ++i)
        te[i] = detail::trunc_normal_exp_moment(pm.mu_star[i], pm.sigma2_star[i], 1.0);
    return te;
}

enum class TeMode {
    plain, // E[exp(-Z) | eps]: no decay factor inside the score, constant in t
    bc92   // E[exp(-h_t Z) | eps]: decay-weighted, varies over t
};

/// N x T efficiency scores under the time-varying model. bc92 inserts the
/// decay factor of each period into the conditional expectation; plain
/// replicates the time-invariant formula applied to the time-varying
/// moments.
inline Eigen::MatrixXd technical_efficiency_tv(const PosteriorMoments& pm,
                                               const DecayProfile& decay, TeMode mode) {
    const int n = static_cast<int>(pm.mu_star.size());
    const int t = static_cast<int>(decay.values.size());
    Eigen::MatrixXd te(n, t);
    for (int i = 0; i < n; ++i) {
        if (mode == TeMode::plain) {
            const double v = detail::trunc_normal_exp_moment(pm.mu_star[i], pm.sigma2_star[i], 1.0);
            te.row(i).setConstant(v);
        } else {
            for (int j = 0; j < t; ++j)
                te(i, j) = detail::trunc_normal_exp_moment(pm.mu_star[i], pm.sigma2_star[i],
                                                           decay.values[j]);
        }
    }
    return te;
}

} // namespace stsfa
