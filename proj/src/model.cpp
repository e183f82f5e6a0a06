#include "smmon/model.hpp"

namespace smmon {

namespace {

void require(bool ok, const char* what)
{
    if (!ok)
        throw ConfigError(what);
}

} // namespace

ProjectLimits ProjectLimits::for_region(RegionClass region)
{
    if (region == RegionClass::small)
        return {RegionClass::small, 50 * kMiB, 100 * kMiB};
    return {RegionClass::large, 200 * kMiB, 400 * kMiB};
}

void validate(const ShardLimits& limits)
{
    require(limits.write_bytes_per_sec > 0, "shard write_bytes_per_sec must be positive");
    require(limits.write_records_per_sec > 0, "shard write_records_per_sec must be positive");
    require(limits.read_bytes_per_sec > 0, "shard read_bytes_per_sec must be positive");
    require(limits.read_requests_per_sec > 0, "shard read_requests_per_sec must be positive");
}

void validate(const ProjectLimits& limits)
{
    require(limits.write_bytes_per_sec > 0, "project write_bytes_per_sec must be positive");
    require(limits.read_bytes_per_sec > 0, "project read_bytes_per_sec must be positive");
}

void validate(const ScalingPolicy& policy, const ShardLimits& limits)
{
    require(policy.up_bytes_per_sec < limits.write_bytes_per_sec,
            "scaling up_bytes_per_sec must be below the shard write byte limit");
    require(policy.up_records_per_sec < limits.write_records_per_sec,
            "scaling up_records_per_sec must be below the shard write record limit");
    require(policy.down_bytes_per_sec < policy.up_bytes_per_sec,
            "scaling down_bytes_per_sec must be below up_bytes_per_sec");
    require(policy.down_records_per_sec < policy.up_records_per_sec,
            "scaling down_records_per_sec must be below up_records_per_sec");
    require(policy.down_delay >= VTime{0}, "scaling down_delay must be non-negative");
    require(policy.metric_window > VTime{0}, "scaling metric_window must be positive");
    require(policy.metric_window % kSecond == VTime{0},
            "scaling metric_window must be a whole number of seconds");
    require(policy.min_shards >= 1, "scaling min_shards must be at least 1");
    require(policy.min_shards <= policy.max_shards, "scaling min_shards must not exceed max_shards");
}

void validate(const RetentionPolicy& retention)
{
    require(retention.duration > VTime{0}, "retention duration must be positive");
}

void validate(const SourceLimits& limits)
{
    require(limits.unlimited || limits.delivery_records_per_sec > 0,
            "source delivery_records_per_sec must be positive unless unlimited");
}

void check_default_config()
{
    const ShardLimits shard;
    validate(shard);
    validate(ProjectLimits{});
    validate(ProjectLimits::for_region(RegionClass::small));
    validate(ScalingPolicy{}, shard);
    validate(RetentionPolicy{});
    validate(RetentionPolicy::seven_days());
    validate(SourceLimits{});

    const auto small = ProjectLimits::for_region(RegionClass::small);
    const auto large = ProjectLimits::for_region(RegionClass::large);
    if (large.write_bytes_per_sec != 4 * small.write_bytes_per_sec ||
        large.read_bytes_per_sec != 4 * small.read_bytes_per_sec)
        throw InvariantViolation("large-region project limits must be 4x the small-region limits");
}

std::string to_string(RegionClass region)
{
    return region == RegionClass::small ? "small" : "large";
}

RegionClass parse_region_class(const std::string& text)
{
    if (text == "small")
        return RegionClass::small;
    if (text == "large")
        return RegionClass::large;
    throw ConfigError("unknown region_class '" + text + "'");
}

} // namespace smmon
