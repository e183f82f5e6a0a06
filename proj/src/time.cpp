#include "smmon/time.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>

#include "smmon/model.hpp"

namespace smmon {

VTime parse_duration(std::string_view text)
{
    while (!text.empty() && text.front() == ' ')
        text.remove_prefix(1);
    while (!text.empty() && text.back() == ' ')
        text.remove_suffix(1);
    if (text.empty())
        throw ConfigError("empty duration");

    std::int64_t value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || value < 0)
        throw ConfigError("malformed duration '" + std::string(text) + "'");

    std::string_view unit(ptr, text.data() + text.size() - ptr);
    std::int64_t scale = 0;
    if (unit.empty() || unit == "ms")
        scale = 1;
    else if (unit == "s")
        scale = 1000;
    else if (unit == "m" || unit == "min")
        scale = 60 * 1000;
    else if (unit == "h")
        scale = 3600 * 1000;
    else if (unit == "d")
        scale = 86400 * 1000;
    else
        throw ConfigError("unknown duration unit in '" + std::string(text) + "'");
    return VTime{value * scale};
}

std::string format_duration(VTime d)
{
    const auto v = d.count();
    if (v != 0) {
        if (v % ms(kDay) == 0)
            return std::to_string(v / ms(kDay)) + "d";
        if (v % ms(kHour) == 0)
            return std::to_string(v / ms(kHour)) + "h";
        if (v % ms(kMinute) == 0)
            return std::to_string(v / ms(kMinute)) + "m";
        if (v % ms(kSecond) == 0)
            return std::to_string(v / ms(kSecond)) + "s";
    }
    return std::to_string(v) + "ms";
}

std::string simulated_date(VTime t)
{
    using namespace std::chrono;
    const sys_days day{days{t.count() / ms(kDay)}};
    const year_month_day ymd{day};
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

std::vector<Interval> merge_intervals(std::vector<Interval> intervals)
{
    std::sort(intervals.begin(), intervals.end(),
              [](const Interval& a, const Interval& b) { return a.start < b.start; });
    std::vector<Interval> out;
    for (const auto& iv : intervals) {
        if (iv.end <= iv.start)
            continue;
        if (!out.empty() && iv.start <= out.back().end)
            out.back().end = std::max(out.back().end, iv.end);
        else
            out.push_back(iv);
    }
    return out;
}

VirtualClock::VirtualClock(Mode mode, VTime start)
    : mode_(mode)
    , now_(start)
    , origin_(std::chrono::steady_clock::now())
{
}

VTime VirtualClock::now() const
{
    if (mode_ == Mode::wall)
        return std::chrono::duration_cast<VTime>(std::chrono::steady_clock::now() - origin_);
    return now_;
}

VTime VirtualClock::advance(VTime dt)
{
    if (mode_ == Mode::wall)
        throw ClockError("cannot advance a wall-clock");
    if (dt < VTime{0})
        throw ClockError("negative clock step");
    now_ += dt;
    return now_;
}

} // namespace smmon
