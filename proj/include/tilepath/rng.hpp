#pragma once
#include <cstdint>

namespace tilepath {

// Deterministic PRNG based on SplitMix64 (Steele, Lea & Flood 2014).
// Chosen over std::mt19937 because its output is fully specified by the
// algorithm and identical across platforms and standard libraries.
// Single-owner: never share one instance across threads; derive child
// streams with child() instead.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed), state_(seed) {}

    std::uint64_t seed() const { return seed_; }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1) with 53 bits of precision
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    std::uint64_t uniform_int(std::uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

    bool bernoulli(double p) { return uniform() < p; }

    // Independent child stream k. Decorrelates the child seed from the
    // parent's by one SplitMix64 scramble of (seed, k).
    Rng child(std::uint64_t k) const {
        std::uint64_t z = seed_ ^ (0x9E3779B97F4A7C15ULL * (k + 1));
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return Rng(z ^ (z >> 31));
    }

private:
    std::uint64_t seed_;
    std::uint64_t state_;
};

}  // namespace tilepath
