#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace zwanzig {

namespace detail {

// splitmix64; used only to derive well-separated substream seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace detail

// Deterministic stream on top of mt19937_64 raw outputs. The standard pins
// the engine's output sequence but not the distributions, so uniforms and
// gaussians are derived here explicitly to keep runs reproducible across
// standard libraries.
class RandomStream {
public:
    explicit RandomStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_raw() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; the trig form avoids rejection so the draw count per call
    // is fixed, which keeps substreams aligned.
    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // Integer in [0, n) by rejection on the top multiple of n.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = (~0ULL) - ((~0ULL) % n + 1) % n;
        std::uint64_t x = engine_();
        while (x > limit) x = engine_();
        return x % n;
    }

    // Independent child stream; index-keyed so callers can fan out without
    // coordinating draw counts.
    RandomStream substream(std::uint64_t index) const {
        return RandomStream(detail::splitmix64(seed_ ^ detail::splitmix64(index + 1)));
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace zwanzig
