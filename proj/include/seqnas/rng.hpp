#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace seqnas {

// Seeded random source. All draws are implemented here (not through the
// std distributions) so results are identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Independent stream keyed by (seed, purpose, index).
    static Rng derive(std::uint64_t seed, std::string_view purpose, std::uint64_t index = 0);

    std::uint64_t next() { return engine_(); }

    // Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);

    // Uniform real in [0, 1) with 53 bits of resolution.
    double uniform();

    double normal();
    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    bool coin() { return (next() >> 63) != 0; }

private:
    std::mt19937_64 engine_;
};

// SplitMix64 finalizer; used to combine seeds.
std::uint64_t mix64(std::uint64_t x);

}  // namespace seqnas
