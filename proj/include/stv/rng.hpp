#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace stv {

/// SplitMix64 finalizer (Steele, Lea, Flood 2014).
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Order-dependent fold of several keys into one seed:
/// h = splitmix64(h ^ splitmix64(key)) for each key, starting from h = 0.
constexpr std::uint64_t mix_seed(std::initializer_list<std::uint64_t> keys) noexcept {
    std::uint64_t h = 0;
    for (std::uint64_t k : keys) h = splitmix64(h ^ splitmix64(k));
    return h;
}

/// Portable random source: the MT19937-64 engine (bit-exact across standard
/// libraries) with hand-written conversions, since std distributions are
/// implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [lo, hi] by rejection, free of modulo bias.
    std::int64_t integer(std::int64_t lo, std::int64_t hi);
    /// Standard normal by the Box-Muller transform (one value per call).
    double normal();
    double normal(double mean, double sd) { return mean + sd * normal(); }

private:
    std::mt19937_64 engine_;
};

}  // namespace stv
