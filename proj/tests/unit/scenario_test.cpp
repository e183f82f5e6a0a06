#include <gtest/gtest.h>

#include "intervals.hpp"
#include "smmon/scenario.hpp"

using namespace smmon;

TEST(ScenarioParse, FullDocument)
{
    const auto s = parse_scenario(R"(
name: demo
seed: 9
duration: 2h
demand:
  kind: sinusoidal
  base_rate: 50
  amplitude: 50
  period: 1h
  keywords: [vote, poll]
source:
  delivery_records_per_sec: 50
  backfill_max_results: 20
shard_limits:
  write_records_per_sec: 2000
retention:
  duration: 7d
scaling:
  min_shards: 2
  max_shards: 8
  down_delay: 30m
storage:
  hot_age: 30m
  sweep_interval: 5m
producer:
  queue_capacity: 42
consumer:
  max_records_per_request: 200
faults:
  - {kind: stream_outage, start: 100s, end: 160s}
pricing:
  mode: per_volume
  ingest_rate: 0.1
)");
    EXPECT_EQ(s.name, "demo");
    EXPECT_EQ(s.seed, 9u);
    EXPECT_EQ(s.duration, 2 * kHour);
    EXPECT_EQ(s.demand.kind, DemandProfile::Kind::sinusoidal);
    EXPECT_EQ(s.demand.keywords, (std::vector<std::string>{"vote", "poll"}));
    EXPECT_EQ(s.backfill_max_results, 20u);
    EXPECT_EQ(s.shard_limits.write_records_per_sec, 2000u);
    EXPECT_EQ(s.retention.duration, 7 * kDay);
    EXPECT_EQ(s.scaling.min_shards, 2);
    EXPECT_EQ(s.scaling.down_delay, 30 * kMinute);
    EXPECT_EQ(s.storage.hot.archive_age, 30 * kMinute);
    EXPECT_EQ(s.storage.sweep_interval, 5 * kMinute);
    EXPECT_EQ(s.producer.queue_capacity, 42u);
    EXPECT_EQ(s.consumer.max_records_per_request, 200u);
    ASSERT_EQ(s.faults.size(), 1u);
    EXPECT_EQ(s.faults[0].kind, FaultKind::stream_outage);
    EXPECT_EQ(s.faults[0].window, (Interval{100 * kSecond, 160 * kSecond}));
    EXPECT_EQ(s.pricing.mode, PricingMode::per_volume);
    EXPECT_DOUBLE_EQ(s.pricing.ingest_rate, 0.1);
    EXPECT_NO_THROW(validate(s));
}

TEST(ScenarioParse, Rejections)
{
    EXPECT_THROW(parse_scenario(""), ConfigError);
    EXPECT_THROW(parse_scenario("duration: [1"), ConfigError);
    EXPECT_THROW(parse_scenario("durration: 1h"), ConfigError);
    EXPECT_THROW(parse_scenario("seed: many"), ConfigError);
    EXPECT_THROW(parse_scenario("duration: 1 hour"), ConfigError);
    EXPECT_THROW(parse_scenario("faults:\n  - {kind: meteor, start: 1s, end: 2s}"), ConfigError);
    EXPECT_THROW(parse_scenario("faults:\n  - {kind: stream_outage, start: 1s}"), ConfigError);
    EXPECT_THROW(parse_scenario("pricing: {mode: barter}"), ConfigError);
}

TEST(ScenarioValidate, FaultWindows)
{
    Scenario s;
    s.faults = {{FaultKind::consumer_stall, {100 * kSecond, 100 * kSecond}}};
    EXPECT_THROW(validate(s), ConfigError);
    s.faults = {{FaultKind::consumer_stall, {100 * kSecond, 2 * kHour}}};
    EXPECT_THROW(validate(s), ConfigError);
    s.faults = {{FaultKind::consumer_stall, {100 * kSecond, kHour}}};
    EXPECT_NO_THROW(validate(s));
}

TEST(ScenarioValidate, OtherInvariants)
{
    Scenario s;
    s.duration = VTime{0};
    EXPECT_THROW(validate(s), ConfigError);
    s = {};
    s.duration = VTime{1500};
    EXPECT_THROW(validate(s), ConfigError);
    s = {};
    s.demand.kind = DemandProfile::Kind::trace;
    EXPECT_THROW(validate(s), ConfigError);
    s = {};
    s.storage.hot.archive_age = 2 * kDay;
    EXPECT_THROW(validate(s), ConfigError);
    s = {};
    s.producer.queue_capacity = 0;
    EXPECT_THROW(validate(s), ConfigError);
    s = {};
    s.pricing.storage_rate = -1;
    EXPECT_THROW(validate(s), ConfigError);
    s = {};
    s.scaling.min_shards = 5;
    s.scaling.max_shards = 2;
    EXPECT_THROW(validate(s), ConfigError);
}

TEST(Faults, KindNames)
{
    for (auto k : {FaultKind::source_disconnect, FaultKind::stream_outage, FaultKind::consumer_stall,
                   FaultKind::hot_store_outage, FaultKind::cold_store_outage})
        EXPECT_EQ(parse_fault_kind(to_string(k)), k);
    EXPECT_THROW(parse_fault_kind("network"), ConfigError);
}

TEST(Faults, ActiveIsHalfOpen)
{
    FaultSchedule f({{FaultKind::stream_outage, {100 * kSecond, 160 * kSecond}}});
    EXPECT_FALSE(f.active(FaultKind::stream_outage, 99 * kSecond));
    EXPECT_TRUE(f.active(FaultKind::stream_outage, 100 * kSecond));
    EXPECT_TRUE(f.active(FaultKind::stream_outage, 159 * kSecond));
    EXPECT_FALSE(f.active(FaultKind::stream_outage, 160 * kSecond));
    EXPECT_FALSE(f.active(FaultKind::consumer_stall, 120 * kSecond));
    EXPECT_EQ(f.last_end(), 160 * kSecond);
}

TEST(Faults, OverlappingStallsUnion)
{
    FaultSchedule f({{FaultKind::consumer_stall, {100 * kSecond, 200 * kSecond}},
                     {FaultKind::consumer_stall, {150 * kSecond, 250 * kSecond}},
                     {FaultKind::consumer_stall, {400 * kSecond, 410 * kSecond}}});
    const auto expect = oracle::union_by_scan({{100, 200}, {150, 250}, {400, 410}}, 500);
    const auto& got = f.windows(FaultKind::consumer_stall);
    ASSERT_EQ(got.size(), expect.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        EXPECT_EQ(got[i].start, expect[i].first * kSecond);
        EXPECT_EQ(got[i].end, expect[i].second * kSecond);
    }
    for (int t = 0; t < 500; ++t) {
        bool in_union = false;
        for (const auto& [a, b] : expect)
            in_union = in_union || (t >= a && t < b);
        EXPECT_EQ(f.active(FaultKind::consumer_stall, t * kSecond), in_union) << t;
    }
}

TEST(Cost, UnitHour)
{
    PricingModel p;
    Usage u;
    u.shard_hours = 2 * 10;
    EXPECT_NEAR(estimate_cost(u, p), 0.30, 1e-12);
}

TEST(Cost, VolumeZeroTraffic)
{
    PricingModel p;
    p.mode = PricingMode::per_volume;
    Usage u;
    u.shard_hours = 5;
    EXPECT_EQ(estimate_cost(u, p), 0.0);
}

TEST(Cost, VolumeSumsComponents)
{
    PricingModel p;
    Usage u{0, 2, 3, 4};
    EXPECT_NEAR(estimate_cost(u, p, PricingMode::per_volume), 2 * 0.04 + 3 * 0.04 + 4 * 0.02, 1e-12);
}
