#pragma once

// Interval union by brute-force membership over every millisecond.

#include <cstdint>
#include <utility>
#include <vector>

namespace oracle {

using Span = std::pair<std::int64_t, std::int64_t>; // [first, second)

inline std::vector<Span> union_by_scan(const std::vector<Span>& spans, std::int64_t horizon)
{
    std::vector<bool> covered(static_cast<std::size_t>(horizon), false);
    for (const auto& [a, b] : spans)
        for (auto t = a; t < b && t < horizon; ++t)
            covered[static_cast<std::size_t>(t)] = true;
    std::vector<Span> out;
    for (std::int64_t t = 0; t < horizon; ++t) {
        if (!covered[static_cast<std::size_t>(t)])
            continue;
        auto start = t;
        while (t < horizon && covered[static_cast<std::size_t>(t)])
            ++t;
        // Touching spans count as one.
        if (!out.empty() && out.back().second == start)
            out.back().second = t;
        else
            out.push_back({start, t});
    }
    return out;
}

} // namespace oracle
