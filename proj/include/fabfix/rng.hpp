#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace fabfix {

// std::mt19937_64 produces an implementation-independent stream, but the
// standard distributions do not, so all value mapping lives here.

/// Uniform double in [0, 1) using the top 53 bits of the engine output.
inline double rng_unit(std::mt19937_64& g) {
    return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n) without modulo bias (rejection sampling).
inline std::uint64_t rng_below(std::mt19937_64& g, std::uint64_t n) {
    if (n == 0) return 0;
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
        x = g();
    } while (x >= limit);
    return x % n;
}

/// Uniform integer in [lo, hi] inclusive.
inline long long rng_int(std::mt19937_64& g, long long lo, long long hi) {
    if (hi <= lo) return lo;
    return lo + static_cast<long long>(rng_below(g, static_cast<std::uint64_t>(hi - lo + 1)));
}

/// Uniform double in [lo, hi).
inline double rng_range(std::mt19937_64& g, double lo, double hi) {
    return lo + (hi - lo) * rng_unit(g);
}

/// Log-uniform double in [lo, hi); lo must be > 0.
inline double rng_log_range(std::mt19937_64& g, double lo, double hi) {
    double u = rng_unit(g);
    return lo * std::pow(hi / lo, u);
}

/// Fisher-Yates shuffle driven by rng_below (portable ordering).
template <class T>
void rng_shuffle(std::vector<T>& v, std::mt19937_64& g) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng_below(g, i));
        std::swap(v[i - 1], v[j]);
    }
}

/// splitmix64 finalizer; the core of the counter-based noise generator.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Stateless per-pixel noise in [0, 1), keyed by (seed, x, y).
/// Same inputs give the same value on every platform and in any call order.
inline double coord_noise_unit(std::uint64_t seed, int x, int y) {
    std::uint64_t key = mix64(seed ^ mix64(static_cast<std::uint64_t>(static_cast<std::uint32_t>(x)) |
                                           (static_cast<std::uint64_t>(static_cast<std::uint32_t>(y)) << 32)));
    return static_cast<double>(key >> 11) * 0x1.0p-53;
}

} // namespace fabfix
