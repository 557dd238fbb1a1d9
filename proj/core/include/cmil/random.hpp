#pragma once

#include <cstdint>
#include <random>

namespace cmil {

/// All randomness in the library flows through explicitly seeded engines.
using Rng = std::mt19937_64;

/// Uniform draw on the half-open interval [0, 1) with 53 bits of resolution.
double uniform01(Rng& rng);

/// Standard normal draw (Box-Muller, one value per call).
double standard_normal(Rng& rng);

/// Uniform integer in [0, n).
std::size_t uniform_index(Rng& rng, std::size_t n);

/// Mixes a base seed with a stream index (splitmix64), for per-item streams
/// whose values do not depend on processing order.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace cmil
