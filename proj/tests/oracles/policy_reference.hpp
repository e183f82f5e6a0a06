#pragma once

// Straight-line reading of the scaling rules, kept apart from the library
// so the two can disagree.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace oracle {

struct Sample {
    std::int64_t t_ms;
    double rec;
    double bytes;
};

struct Thresholds {
    double up_rec = 800, up_bytes = 819200;
    double down_rec = 500, down_bytes = 512000;
    std::int64_t delay_ms = 3LL * 3600 * 1000;
};

inline std::vector<std::string> reference_decisions(const std::vector<Sample>& samples, const Thresholds& th)
{
    std::vector<std::string> out;
    std::optional<std::int64_t> since;
    for (const auto& s : samples) {
        if (s.rec > th.up_rec || s.bytes > th.up_bytes) {
            since.reset();
            out.push_back("ScaleUp");
            continue;
        }
        const bool quiet = s.rec < th.down_rec && s.bytes < th.down_bytes;
        if (!quiet) {
            out.push_back(since ? "CancelDown" : "Hold");
            since.reset();
            continue;
        }
        if (!since) {
            since = s.t_ms;
            out.push_back("ScheduleDown");
        } else if (s.t_ms - *since >= th.delay_ms) {
            since.reset();
            out.push_back("ExecuteDown");
        } else {
            out.push_back("Hold");
        }
    }
    return out;
}

} // namespace oracle
