#pragma once

#include <cstdint>
#include <vector>

namespace uasrl::grad {

/// xoshiro256++ seeded via splitmix64. Hand-rolled so that streams are
/// bit-identical across platforms and standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    /// Uniform in [0, 1) with 53-bit resolution.
    double uniform01();

    /// Uniform integer in [0, n).
    std::size_t uniform_index(std::size_t n);

    /// Standard normal via Box-Muller (cached spare).
    double gaussian();

    /// Derives an independent child stream (for env/policy/eval splits).
    Rng split();

private:
    std::uint64_t s_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

/// Samples an index from a probability vector via CDF walk. The caller
/// guarantees probs sums to ~1; the last positive entry absorbs rounding.
std::size_t sample_categorical(const std::vector<double>& probs, Rng& rng);

} // namespace uasrl::grad
