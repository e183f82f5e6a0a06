#pragma once

#include <algorithm>
#include <cstdint>

#include "smmon/time.hpp"

namespace smmon {

/// Continuous-refill token bucket holding exactly one second of budget.
///
/// Levels are kept in milli-tokens so that refill over an integer number of
/// milliseconds is exact: a rate of R units/s adds R milli-tokens per ms.
class TokenBucket {
  public:
    TokenBucket() = default;

    TokenBucket(std::uint64_t rate_per_sec, VTime start)
        : rate_(rate_per_sec)
        , capacity_(rate_per_sec * 1000)
        , level_(capacity_)
        , last_(start)
    {
    }

    /// Brings the level up to `now`. Time never runs backwards for a bucket;
    /// an earlier `now` is treated as no elapsed time.
    void refill(VTime now) noexcept
    {
        if (now <= last_)
            return;
        const auto dt = static_cast<std::uint64_t>((now - last_).count());
        last_ = now;
        if (dt >= 1000) {
            level_ = capacity_;
            return;
        }
        level_ = std::min(capacity_, level_ + rate_ * dt);
    }

    bool can_take(std::uint64_t units) const noexcept { return units * 1000 <= level_; }

    void take(std::uint64_t units) noexcept { level_ -= units * 1000; }

    /// Whole units currently available.
    std::uint64_t available() const noexcept { return level_ / 1000; }

    std::uint64_t rate() const noexcept { return rate_; }

  private:
    std::uint64_t rate_ = 0;
    std::uint64_t capacity_ = 0;
    std::uint64_t level_ = 0;
    VTime last_{0};
};

} // namespace smmon
