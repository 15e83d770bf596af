#pragma once

#include <cstdint>
#include <random>

namespace latent {

// Deterministic RNG used everywhere reproducibility matters (campaign seeds,
// insertion positions, id allocation, parameter draws). All reductions are
// implemented here instead of <random> distributions, whose output is
// implementation-defined and would break byte-identical reruns across
// standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform integer in [0, n). n == 0 returns 0.
    std::uint64_t bounded(std::uint64_t n) {
        if (n == 0) return 0;
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }

    // Uniform double in [0, 1) with 53 random bits.
    double unit() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

    // Log-uniform draw over [lo, hi], lo > 0.
    double log_uniform(double lo, double hi);

    // Derive an independent substream; `tag` separates consumers sharing a seed.
    Rng fork(std::uint64_t tag) {
        return Rng(next() ^ (tag * 0x9e3779b97f4a7c15ULL));
    }

private:
    std::mt19937_64 engine_;
};

} // namespace latent
