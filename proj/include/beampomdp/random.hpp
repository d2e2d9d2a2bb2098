#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace beampomdp {

/// splitmix64 finalizer; used to derive independent substream seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t index) noexcept {
    return mix_seed(mix_seed(seed) ^ mix_seed(index + 0x632be59bd9b4e019ULL));
}

/**
 * Seeded generator with portable sampling helpers.
 *
 * std::mt19937_64 has a standardized output sequence, but the standard
 * distributions do not, so uniform/integer/geometric draws are done here
 * to keep results identical across standard library implementations.
 */
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(mix_seed(seed)) {}
    Rng(std::uint64_t seed, std::uint64_t stream) : engine_(substream_seed(seed, stream)) {}

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform integer on [0, n); n must be positive.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x = engine_();
        while (x >= limit) x = engine_();
        return x % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Number of trials up to and including the first success, success
    /// probability `p` in (0, 1]. Saturates at `cap` (returns cap + 1 when
    /// the first success lies beyond it).
    std::uint64_t geometric(double p, std::uint64_t cap) {
        if (p >= 1.0) return 1;
        const double u = 1.0 - uniform(); // (0, 1]
        const double trials = std::floor(std::log(u) / std::log1p(-p)) + 1.0;
        if (!(trials <= static_cast<double>(cap))) return cap + 1;
        return static_cast<std::uint64_t>(trials);
    }

    std::mt19937_64& engine() { return engine_; }

private:
    std::mt19937_64 engine_;
};

} // namespace beampomdp
