#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace smmon {

/// Virtual time in integer milliseconds. Used both for instants (offset from
/// the simulation epoch) and for durations.
using VTime = std::chrono::milliseconds;

constexpr VTime kSecond{1000};
constexpr VTime kMinute{60 * 1000};
constexpr VTime kHour{60 * 60 * 1000};
constexpr VTime kDay{24 * 60 * 60 * 1000};

inline std::int64_t ms(VTime t) noexcept { return t.count(); }

/// Parses "250ms", "90s", "15m", "3h", "7d" or a bare integer (milliseconds).
/// Throws ConfigError on malformed input.
VTime parse_duration(std::string_view text);

/// Renders a duration with the largest unit that divides it exactly.
std::string format_duration(VTime d);

/// "YYYY-MM-DD" of the simulated calendar day containing `t` (epoch 1970-01-01).
std::string simulated_date(VTime t);

/// Half-open interval [start, end) of virtual time.
struct Interval {
    VTime start{0};
    VTime end{0};

    bool contains(VTime t) const noexcept { return t >= start && t < end; }
    friend bool operator==(const Interval&, const Interval&) = default;
};

/// Union of intervals as a sorted list of disjoint ones. Touching intervals
/// are coalesced.
std::vector<Interval> merge_intervals(std::vector<Interval> intervals);

class VirtualClock {
  public:
    enum class Mode { simulated, wall };

    explicit VirtualClock(Mode mode = Mode::simulated, VTime start = VTime{0});

    /// Current time. In wall mode this is the elapsed time since construction.
    VTime now() const;

    /// Moves simulated time forward by `dt`. Rejects negative steps and
    /// wall-mode clocks with ClockError.
    VTime advance(VTime dt);

    Mode mode() const noexcept { return mode_; }

  private:
    Mode mode_;
    VTime now_;
    std::chrono::steady_clock::time_point origin_;
};

} // namespace smmon
