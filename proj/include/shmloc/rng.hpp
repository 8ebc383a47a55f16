#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>

namespace shmloc {

namespace detail {

// splitmix64 finalizer; used both for seeding and stream derivation.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

} // namespace detail

/// Deterministic xoshiro256** generator. All randomness in the toolkit
/// flows through this type so results are reproducible across platforms
/// (the standard library distributions are implementation-defined and
/// deliberately avoided).
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& word : state_) {
            x = detail::mix64(x);
            word = x;
        }
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = detail::rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = detail::rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in (0, 1].
    double uniform() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    /// Uniform integer in [0, bound).
    std::uint64_t uniform_below(std::uint64_t bound) {
        return next_u64() % bound;
    }

    /// Standard normal via Box-Muller. Consumes exactly two uniforms per
    /// call; no cached spare, so the draw sequence is easy to reason about.
    double normal() {
        const double u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(2.0 * std::numbers::pi * u2);
    }

private:
    std::uint64_t state_[4];
};

/// Derives an independent stream seed from a root seed and a path of
/// indices, e.g. (seed, class, rep) or (seed, restart). Work items seeded
/// this way can run concurrently with bit-identical results.
inline std::uint64_t derive_seed(std::uint64_t root,
                                 std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = detail::mix64(root);
    for (std::uint64_t p : path) {
        h = detail::mix64(h ^ detail::mix64(p));
    }
    return h;
}

inline Rng derive_rng(std::uint64_t root,
                      std::initializer_list<std::uint64_t> path) {
    return Rng(derive_seed(root, path));
}

} // namespace shmloc
