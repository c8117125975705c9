#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace brt {

// Seeded generator with portable draws. The standard distributions are
// implementation-defined, so everything that feeds a reproducible output goes
// through the helpers below instead.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform integer in [0, n). Rejection keeps it unbiased.
    std::uint64_t below(std::uint64_t n);

    // Uniform double in [0, 1) with 53 random bits.
    double unit();

    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

    // Index drawn from a (not necessarily normalized) weight vector.
    std::size_t categorical(std::span<const double> weights);

private:
    std::mt19937_64 engine_;
};

// SplitMix64 finalizer; used to derive independent child seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

} // namespace brt
