#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace sll {

// Deterministic xorshift-family generator (xoshiro256++), state fully derived
// from a 64-bit seed via splitmix64.  Same seed => same stream on every
// platform; independent child streams are derived from (seed, stream index),
// not from consumed state, so they can be re-created at any time.
class SeededRng {
public:
    explicit SeededRng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform double in [0, 1) with full 53-bit mantissa resolution.
    double uniform01();

    // Standard normal via the polar (Marsaglia) method; caches the spare.
    double normal();

    // Uniform integer in [0, n); rejection sampling keeps it unbiased.
    std::uint64_t below(std::uint64_t n);

    bool bernoulli(double p);

    // Fisher-Yates over indices 0..n-1.
    std::vector<std::size_t> permutation(std::size_t n);

    // Independent stream keyed by (original seed, stream index).
    SeededRng child(std::uint64_t stream) const;

    std::uint64_t seed() const { return seed_; }

private:
    std::uint64_t seed_;
    std::array<std::uint64_t, 4> state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// splitmix64 step; also used for deriving per-layer / per-head seeds.
std::uint64_t splitmix64(std::uint64_t& state);

// Stateless hash of (seed, stream) to a fresh 64-bit seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace sll
