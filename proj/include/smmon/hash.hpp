#pragma once

#include <cstdint>
#include <string_view>

namespace smmon {

/// 64-bit FNV-1a. Partition keys are routed by this hash so that anyone can
/// recompute shard placement from the key alone.
constexpr std::uint64_t fnv1a64(std::string_view data) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// SplitMix64 finalizer; turns (seed, id) pairs into well-spread engine seeds.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Routing hash of a partition key: FNV-1a 64 passed through the SplitMix64
/// finalizer. Plain FNV-1a leaves the top bits nearly constant for short keys
/// that differ only at the end, which defeats splitting at the range midpoint.
constexpr std::uint64_t partition_hash(std::string_view key) noexcept
{
    return mix64(fnv1a64(key));
}

} // namespace smmon
