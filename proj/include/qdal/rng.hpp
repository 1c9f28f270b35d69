#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace qdal {

using Rng = std::mt19937_64;

/// Mixes a base seed with a sequence of stream tags (splitmix64 finalizer), so that
/// e.g. (seed, round, purpose) maps to an independent, reproducible stream.
std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags);

inline Rng make_rng(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
    return Rng(derive_seed(base, tags));
}

/// Uniform on the open interval (0, 1) with 53 bits of resolution.
inline double uniform_open01(Rng& rng) {
    return (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53;
}

/// Uniform integer in [0, n); n must be positive.
std::uint64_t uniform_index(Rng& rng, std::uint64_t n);

/// Stream tags used throughout the experiment loop.
namespace stream {
inline constexpr std::uint64_t kInitialSet = 1;
inline constexpr std::uint64_t kModelInit = 2;
inline constexpr std::uint64_t kAcquisition = 3;
inline constexpr std::uint64_t kMcDropout = 4;
inline constexpr std::uint64_t kBaseline = 5;
inline constexpr std::uint64_t kTraining = 6;
}  // namespace stream

}  // namespace qdal
