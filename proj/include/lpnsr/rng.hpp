#pragma once

#include <cstdint>
#include <string_view>

namespace lpnsr {

// xoshiro256++ seeded through splitmix64. Self-contained so that streams are
// reproducible byte-for-byte regardless of the standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform in [0, 1).
    double uniform();
    double uniform(double lo, double hi);
    // Inclusive bounds.
    int uniform_int(int lo, int hi);
    // Standard normal via Box-Muller; caches the spare value.
    double normal();

    // Derives an independent stream id from (seed, tag, index). Used to give
    // every sample/split/purpose its own deterministic stream.
    static std::uint64_t derive(std::uint64_t seed, std::string_view tag, std::uint64_t index);

private:
    std::uint64_t s_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace lpnsr
