#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace pld {

// FNV-1a, used for config hashing and seed-stream labels. Stable across
// platforms, unlike std::hash.
inline constexpr std::uint64_t fnv1a64(std::string_view s,
                                       std::uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Counter-style seed derivation: a master seed plus a stream label and up to
// three indices map to an independent substream seed. Trials seeded this way
// are reproducible regardless of scheduling or worker count.
inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t label,
                                           std::uint64_t a = 0, std::uint64_t b = 0,
                                           std::uint64_t c = 0) {
    std::uint64_t h = splitmix64(master ^ 0x5851f42d4c957f2dull);
    h = splitmix64(h ^ label);
    h = splitmix64(h ^ a);
    h = splitmix64(h ^ b);
    h = splitmix64(h ^ c);
    return h;
}

// Seeded pseudo-random source. All randomness in the pipeline flows through
// explicit RandomSource instances so every caller controls determinism.
class RandomSource {
public:
    explicit RandomSource(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // uniform double in [0, 1)
    double uniform() {
        return double(engine_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n), rejection-sampled so the result does not
    // depend on library-specific distribution internals
    std::uint64_t uniform_index(std::uint64_t n) {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    // standard normal via the polar Box-Muller method
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u, v, r;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            r = u * u + v * v;
        } while (r >= 1.0 || r == 0.0);
        const double s = std::sqrt(-2.0 * std::log(r) / r);
        spare_ = v * s;
        have_spare_ = true;
        return u * s;
    }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace pld
