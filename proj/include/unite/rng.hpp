#pragma once

// Seeded random streams for reproducible sampling. Every draw in the engine
// flows from one 64-bit seed through the derivation below; no other entropy
// source exists. Streams are xoshiro256++ seeded via SplitMix64, normals via
// the Marsaglia polar method, so results are identical across platforms with
// the same libm (log/sqrt are the only transcendental calls).
//
// Stream splitting: stream k of master seed s starts from the SplitMix64
// state s XOR (k+1)*0x9E3779B97F4A7C15 (see RngStream::substream). Chains,
// sweep cells and dataset generation all use this rule.

#include <cstdint>

namespace unite {

// One step of SplitMix64; advances state and returns the output word.
std::uint64_t splitmix64_next(std::uint64_t& state);

class RngStream {
public:
    explicit RngStream(std::uint64_t seed);

    static RngStream substream(std::uint64_t master_seed, std::uint64_t index);

    std::uint64_t next_u64();

    // [0, 1) with 53 random bits
    double uniform01();

    // uniform over [lo, hi)
    double uniform(double lo, double hi);

    // standard normal; generates pairs, caches the spare
    double normal();

    // uniform integer in [0, n)
    std::uint64_t below(std::uint64_t n);

private:
    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace unite
