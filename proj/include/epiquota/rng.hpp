#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace epiquota {

// A named random stream. The engine is std::mt19937_64 (bit-exact by the
// standard); the distributions below are written out so draws are identical
// across standard libraries.
class RandomStream {
public:
    RandomStream(std::uint64_t seed, std::string_view stream);

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 bits of resolution.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n);

    double normal();
    double normal(double mean, double sd) { return mean + sd * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

RandomStream seeded_rng(std::uint64_t seed, std::string_view stream);

// Stable 64-bit mix of (seed, label); used to derive per-stream engine seeds.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

}  // namespace epiquota
