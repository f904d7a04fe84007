#pragma once

#include <cmath>

namespace stsfa {

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double ln_2pi = 1.8378770664093454836; // ln(2*pi)

inline double std_normal_pdf(double x) {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * pi);
}

inline double std_normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

/// ln(1 - Phi(x)), finite for every finite x.
///
/// Three regimes:
///   x <= 0 : 1-Phi(x) is near one; log1p on the small upper-tail mass keeps
///            full relative precision.
///   x < 30 : erfc is still a normal double, take its log directly.
///   else   : Mills-ratio asymptotic series; erfc would lose precision in the
///            denormal range.
inline double std_normal_log_cdf_complement(double x) {
    const double inv_sqrt2 = 0.7071067811865475244;
    if (x <= 0.0) {
        return std::log1p(-0.5 * std::erfc(-x * inv_sqrt2));
    }
    if (x < 30.0) {
        return std::log(0.5 * std::erfc(x * inv_sqrt2));
    }
    // 1-Phi(x) ~ phi(x)/x * (1 - 1/x^2 + 3/x^4 - 15/x^6 + ...)
    const double z = 1.0 / (x * x);
    double series = 1.0, term = 1.0;
    for (int k = 1; k <= 8; ++k) {
        term *= -(2.0 * k - 1.0) * z;
        series += term;
    }
    return -0.5 * x * x - std::log(x) - 0.5 * ln_2pi + std::log(series);
}

} // namespace stsfa
