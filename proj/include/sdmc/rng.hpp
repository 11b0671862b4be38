#pragma once

#include <cstdint>
#include <random>

namespace sdmc {

/// Deterministic RNG used everywhere randomness is needed. The engine is
/// std::mt19937_64 (its output sequence is pinned by the standard); doubles
/// are produced by an explicit 53-bit conversion rather than
/// std::uniform_real_distribution, whose output is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    std::uint64_t next_u64() { return engine_(); }

    /// Index drawn from an unnormalized nonnegative weight vector by
    /// inverse CDF on a single uniform variate. Ties broken toward the
    /// lowest index; any residual mass from rounding goes to the last entry.
    template <typename Container>
    std::size_t categorical(const Container& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        const double u = uniform() * total;
        double acc = 0.0;
        std::size_t i = 0;
        for (double w : weights) {
            acc += w;
            if (u < acc) return i;
            ++i;
        }
        return weights.size() ? weights.size() - 1 : 0;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace sdmc
