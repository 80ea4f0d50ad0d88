#pragma once

#include <cstdint>

namespace tourney {

// Counter-based uniform stream: the value at (seed, index) depends on nothing
// else, so any partition of replicates across threads sees the same numbers.
inline std::uint64_t mix64(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Uniform in the open interval (0, 1).
inline double uniform_at(std::uint64_t seed, std::uint64_t index) noexcept {
    std::uint64_t h = mix64(seed * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL);
    h = mix64(h ^ (index + 0x9e3779b97f4a7c15ULL));
    h = mix64(h + index * 0xd1b54a32d192ed03ULL);
    return (static_cast<double>(h >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace tourney
