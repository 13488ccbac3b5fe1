#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace covrl {

// Deterministic seeded stream. mt19937_64 output is pinned by the standard;
// uniform doubles are derived from raw bits rather than std distributions so
// that results are identical on every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed), seed_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Uniform integer in [0, n).
    std::uint64_t uniform_int(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("uniform_int: n must be > 0");
        // rejection sampling to avoid modulo bias
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x;
        do { x = engine_(); } while (x >= limit);
        return x % n;
    }

    // Index sampled from a probability vector by CDF scan; the final bucket
    // absorbs rounding slack.
    std::size_t categorical(std::span<const double> probs) {
        const double u = uniform01();
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc) return i;
        }
        return probs.empty() ? 0 : probs.size() - 1;
    }

    // Derived independent stream for (this seed, index); splitmix64 mixing.
    Rng child(std::uint64_t index) const {
        std::uint64_t z = seed_ + 0x9e3779b97f4a7c15ULL * (index + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return Rng(z ^ (z >> 31));
    }

private:
    std::mt19937_64 engine_;
    std::uint64_t seed_;
};

} // namespace covrl
