#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "smmon/consumer.hpp"
#include "smmon/model.hpp"
#include "smmon/producer.hpp"
#include "smmon/source.hpp"
#include "smmon/storage.hpp"

namespace smmon {

enum class FaultKind { source_disconnect, stream_outage, consumer_stall, hot_store_outage, cold_store_outage };

std::string to_string(FaultKind k);
/// Throws ConfigError for an unknown kind.
FaultKind parse_fault_kind(const std::string& text);

struct FaultSpec {
    FaultKind kind;
    Interval window;
};

/// Armed faults. A component is down at tick t iff some window of its kind
/// has start <= t < end; windows of one kind act as their union.
class FaultSchedule {
  public:
    FaultSchedule() = default;
    explicit FaultSchedule(const std::vector<FaultSpec>& faults);

    bool active(FaultKind kind, VTime t) const;
    const std::vector<Interval>& windows(FaultKind kind) const;
    /// End of the last window of any kind, or 0.
    VTime last_end() const;

  private:
    std::vector<Interval> windows_[5];
};

enum class PricingMode { per_unit_hour, per_volume };

std::string to_string(PricingMode m);
PricingMode parse_pricing_mode(const std::string& text);

struct PricingModel {
    PricingMode mode = PricingMode::per_unit_hour;
    double unit_hour_rate = 0.015; ///< per shard-hour
    double ingest_rate = 0.04;     ///< per GiB put
    double delivery_rate = 0.04;   ///< per GiB read
    double storage_rate = 0.02;    ///< per GiB stored
};

struct Usage {
    double shard_hours = 0;
    double ingest_gib = 0;
    double delivery_gib = 0;
    double storage_gib = 0;
};

double estimate_cost(const Usage& usage, const PricingModel& pricing, PricingMode mode);
inline double estimate_cost(const Usage& usage, const PricingModel& pricing)
{
    return estimate_cost(usage, pricing, pricing.mode);
}

struct StorageConfig {
    HotStoreConfig hot;
    VTime sweep_interval = 10 * kMinute;
};

struct Scenario {
    std::string name = "scenario";
    std::uint64_t seed = 1;
    VTime duration = kHour;
    DemandProfile demand;
    SourceLimits source_limits;
    std::size_t backfill_max_results = 100;
    ShardLimits shard_limits;
    RetentionPolicy retention;
    ScalingPolicy scaling;
    ProjectLimits project;
    StorageConfig storage;
    ProducerConfig producer;
    ConsumerConfig consumer;
    std::vector<FaultSpec> faults;
    PricingModel pricing;
};

/// Parses a YAML scenario document. Relative trace paths resolve against
/// `base_dir`. Throws ConfigError on malformed or invalid content.
Scenario parse_scenario(const std::string& text, const std::string& base_dir = ".");
Scenario load_scenario(const std::string& path);

/// Throws ConfigError naming the first violated constraint.
void validate(const Scenario& s);

} // namespace smmon
