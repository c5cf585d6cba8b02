// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

namespace volnet {

/// SplitMix64 generator. The whole state is one 64-bit word, so it can be
/// checkpointed verbatim and yields the same stream on every platform.
///
///   state += 0x9E3779B97F4A7C15
///   z = state; z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
///              z = (z ^ (z >> 27)) * 0x94D049BB133111EB
///   return z ^ (z >> 31)
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

    std::uint64_t next_u64();

    /// Uniform on [0, 1) with 53 random bits.
    double uniform();

    /// Uniform integer on [0, n). Rejection sampling, no modulo bias. n must be > 0.
    std::uint64_t uniform_int(std::uint64_t n);

    /// Standard normal via Box-Muller; consumes two uniforms, returns the cosine branch.
    double normal();

    std::uint64_t state() const { return state_; }
    void set_state(std::uint64_t s) { state_ = s; }

private:
    std::uint64_t state_;
};

/// Stateless mixing of several words into one seed (SplitMix64 finalizer chain).
/// Used to derive per-sample augmentation streams from (seed, epoch, index).
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0);

}  // namespace volnet
