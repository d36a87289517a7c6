#pragma once

#include <cstdint>
#include <random>

namespace fone {

/// Seeded generator with portable distributions. std::mt19937_64 output is
/// fixed by the standard; the std distributions are not, so every draw
/// used for data or initialisation goes through here.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next() { return engine_(); }
    /// Uniform in [0, bound), bound > 0, without modulo bias.
    std::uint64_t below(std::uint64_t bound);
    /// Uniform in [lo, hi].
    std::uint64_t between(std::uint64_t lo, std::uint64_t hi);
    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    /// Standard normal (Box-Muller, no cached spare).
    double normal();
    /// Normal(0, stddev) redrawn until |x| <= 2 stddev.
    double truncated_normal(double stddev);

    /// Independent stream derived from this seed and `stream`.
    static Rng derive(std::uint64_t seed, std::uint64_t stream);

private:
    std::mt19937_64 engine_;
};

/// SplitMix64 finaliser; used to derive well-mixed sub-seeds.
std::uint64_t mix_seed(std::uint64_t x);

}  // namespace fone
