// SPDX-License-Identifier: Apache-2.0
#include "volnet/rng.hpp"

#include <cmath>
#include <numbers>

#include "volnet/errors.hpp"

namespace volnet {

namespace {

std::uint64_t finalize(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace

std::uint64_t Rng::next_u64() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return finalize(state_);
}

double Rng::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::uniform_int(std::uint64_t n) {
    if (n == 0) {
        throw ArgumentError("uniform_int: n must be positive");
    }
    // Largest multiple of n that fits; draws at or above it are rejected.
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

double Rng::normal() {
    // 1 - u keeps the log argument in (0, 1].
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    std::uint64_t h = finalize(a + 0x9E3779B97F4A7C15ULL);
    h = finalize(h ^ (b + 0x632BE59BD9B4E019ULL));
    h = finalize(h ^ (c + 0x85157AF5ULL));
    return h;
}

}  // namespace volnet
