#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace stsfa {

/// 64-bit mixing function (splitmix64 finalizer). Used both to expand seeds
/// and to derive independent per-replicate streams from a master seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for replicate `rep` of grid cell `cell` under `master`. The chain of
/// splitmix64 steps makes streams independent of execution order, so a
/// parallel schedule cannot change what any replicate draws.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t cell, std::uint64_t rep) {
    return splitmix64(splitmix64(splitmix64(master) ^ cell) ^ rep);
}

/// Deterministic random source. Normal deviates use the Box-Muller transform
/// rather than std::normal_distribution, whose sequence is
/// implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    /// Uniform on [0,1) with 53 random bits.
    double uniform01() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    double normal(double mean = 0.0, double sd = 1.0) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + sd * spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01(); // log(0) guard
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return mean + sd * r * std::cos(a);
    }

    /// |N(0, sd^2)|.
    double half_normal(double sd = 1.0) { return std::abs(normal(0.0, sd)); }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace stsfa
