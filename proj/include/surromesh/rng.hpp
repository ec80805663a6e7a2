#pragma once

#include <cstdint>
#include <random>

namespace surromesh {

// splitmix64; used to derive independent substreams from (seed, stream id).
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// Deterministic RNG wrapper. Distributions are implemented here rather than
// with <random> distribution objects so that draws are identical across
// standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
    std::uint64_t below(std::uint64_t n);

    // Standard normal via Box-Muller (one value per call).
    double normal();

    Rng fork(std::uint64_t stream) { return Rng(mix_seed(gen_(), stream)); }

private:
    std::mt19937_64 gen_;
};

} // namespace surromesh
