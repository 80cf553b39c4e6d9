#pragma once

#include <cstdint>

namespace diffem {

/// Deterministic xoshiro256++ stream with Box-Muller gaussians. Streams for
/// parallel work are derived with derive() so results do not depend on
/// thread count or evaluation order.
class Rng {
public:
    explicit Rng(uint64_t seed);

    uint64_t next_u64();
    /// Uniform in [0, 1).
    double uniform();
    /// Standard normal.
    double gaussian();

    /// Splitmix-based stream derivation: mixes (master, a, b) into a seed.
    static uint64_t derive(uint64_t master, uint64_t a, uint64_t b = 0);

private:
    uint64_t s_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace diffem
