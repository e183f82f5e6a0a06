#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>

#include "../oracles/integrate.hpp"
#include "smmon/source.hpp"

using namespace smmon;

namespace {

DemandProfile constant(double rate)
{
    DemandProfile p;
    p.kind = DemandProfile::Kind::constant;
    p.base_rate = rate;
    return p;
}

DemandProfile sinusoid(double base, double amp, VTime period)
{
    DemandProfile p;
    p.kind = DemandProfile::Kind::sinusoidal;
    p.base_rate = base;
    p.amplitude = amp;
    p.period = period;
    return p;
}

SourceLimits unlimited()
{
    SourceLimits l;
    l.unlimited = true;
    return l;
}

} // namespace

TEST(Generate, ConstantTenPerSecond)
{
    SyntheticSource src("s", constant(10), unlimited());
    const auto recs = src.generate(VTime{0}, kSecond);
    ASSERT_EQ(recs.size(), 10u);
    for (const auto& r : recs) {
        EXPECT_GE(r.created_at, VTime{0});
        EXPECT_LT(r.created_at, kSecond);
        EXPECT_EQ(r.source_id, "s");
    }
}

TEST(Generate, ZeroRateIsEmpty)
{
    SyntheticSource src("s", constant(0), unlimited());
    EXPECT_TRUE(src.generate(VTime{0}, kHour).empty());
}

TEST(Generate, RejectsEmptyInterval)
{
    SyntheticSource src("s", constant(1), unlimited());
    EXPECT_THROW(src.generate(kSecond, kSecond), std::invalid_argument);
}

TEST(Generate, SinusoidFullPeriodMatchesSimpson)
{
    const auto p = sinusoid(50, 50, kHour);
    SyntheticSource src("s", p, unlimited());
    std::size_t total = 0;
    for (VTime t{0}; t < kHour; t += kSecond)
        total += src.generate(t, t + kSecond).size();
    const double base = 50.0 * 3600;
    const double numeric = oracle::simpson(
        [](double s) { return std::max(0.0, 50 + 50 * std::sin(2 * std::numbers::pi * s / 3600)); }, 0, 3600);
    EXPECT_NEAR(static_cast<double>(total), base, base * 0.01);
    EXPECT_NEAR(static_cast<double>(total), numeric, 2.0);
}

TEST(Generate, ClampedSinusoidMatchesSimpson)
{
    // Amplitude above base: negative lobes clamp to zero.
    const auto p = sinusoid(20, 60, VTime{600'000});
    const double numeric = oracle::simpson(
        [](double s) { return std::max(0.0, 20 + 60 * std::sin(2 * std::numbers::pi * s / 600)); }, 0, 1800, 200000);
    EXPECT_NEAR(p.cumulative(VTime{1'800'000}), numeric, 0.5);
    for (int s = 0; s < 1800; s += 7)
        EXPECT_GE(p.rate_at(VTime{s * 1000}), 0.0);
}

TEST(Generate, BurstAddsOnTop)
{
    DemandProfile p = constant(10);
    p.kind = DemandProfile::Kind::burst;
    p.bursts.push_back({VTime{10'000}, VTime{5'000}, 90});
    EXPECT_NEAR(p.cumulative(VTime{60'000}), 10 * 60 + 90 * 5, 1e-6);
    EXPECT_DOUBLE_EQ(p.rate_at(VTime{12'000}), 100);
    EXPECT_DOUBLE_EQ(p.rate_at(VTime{15'000}), 10);
}

TEST(Generate, TraceIsStepFunction)
{
    const auto path = std::filesystem::temp_directory_path() / "smmon_trace_test.csv";
    {
        std::ofstream out(path);
        out << "# ramp\n0,5\n10000,20\n\n30000,0\n";
    }
    DemandProfile p;
    p.kind = DemandProfile::Kind::trace;
    p.trace = load_trace(path.string());
    ASSERT_EQ(p.trace.size(), 3u);
    EXPECT_NEAR(p.cumulative(VTime{40'000}), 5 * 10 + 20 * 20, 1e-9);
    SyntheticSource src("s", p, unlimited());
    EXPECT_EQ(src.generate(VTime{10'000}, VTime{11'000}).size(), 20u);
    std::filesystem::remove(path);
}

TEST(Generate, UnreadableTraceIsConfigError)
{
    EXPECT_THROW(load_trace("/nonexistent/trace.csv"), ConfigError);
}

TEST(Generate, DeterministicGivenSeed)
{
    auto p = constant(30);
    p.seed = 99;
    SyntheticSource a("s", p, unlimited());
    SyntheticSource b("s", p, unlimited());
    const auto ra = a.generate(VTime{0}, VTime{5000});
    const auto rb = b.generate(VTime{0}, VTime{5000});
    ASSERT_EQ(ra.size(), rb.size());
    for (std::size_t i = 0; i < ra.size(); ++i) {
        EXPECT_EQ(ra[i].payload, rb[i].payload);
        EXPECT_EQ(ra[i].created_at, rb[i].created_at);
        EXPECT_EQ(ra[i].record_id, rb[i].record_id);
    }
    p.seed = 100;
    SyntheticSource c("s", p, unlimited());
    EXPECT_NE(c.generate(VTime{0}, VTime{5000})[0].payload, ra[0].payload);
}

TEST(Deliver, SixtyInOneSecondCapFifty)
{
    SyntheticSource src("s", constant(60), SourceLimits{});
    auto d = src.deliver(VTime{0}, kSecond);
    EXPECT_EQ(d.delivered.size(), 50u);
    EXPECT_EQ(d.dropped.size(), 10u);
    // Earliest first.
    EXPECT_LT(d.delivered.back().record_id, d.dropped.front());
}

TEST(Deliver, FiftyAtCapAllDelivered)
{
    SyntheticSource src("s", constant(50), SourceLimits{});
    auto d = src.deliver(VTime{0}, kSecond);
    EXPECT_EQ(d.delivered.size(), 50u);
    EXPECT_TRUE(d.dropped.empty());
}

TEST(Deliver, UnlimitedNeverDrops)
{
    SyntheticSource src("s", constant(500), unlimited());
    EXPECT_TRUE(src.deliver(VTime{0}, VTime{3000}).dropped.empty());
}

TEST(Deliver, SinusoidDropsOnlyInSecondsAboveCap)
{
    SyntheticSource src("s", sinusoid(50, 50, kHour), SourceLimits{});
    for (VTime t{0}; t < kHour; t += kSecond)
        src.deliver(t, t + kSecond);
    const auto& ledger = src.ledger();
    std::map<std::int64_t, int> generated, delivered, dropped;
    for (auto id = ledger.id_base(); id < ledger.next_id(); ++id) {
        const auto& e = ledger.entry(id);
        const auto sec = e.created_at_ms / 1000;
        ++generated[sec];
        delivered[sec] += e.status == SourceStatus::delivered;
        dropped[sec] += e.status == SourceStatus::dropped;
    }
    std::size_t total_dropped = 0;
    for (const auto& [sec, n] : generated) {
        EXPECT_LE(delivered[sec], 50);
        if (dropped[sec] > 0)
            EXPECT_GT(n, 50) << "second " << sec;
        total_dropped += static_cast<std::size_t>(dropped[sec]);
    }
    EXPECT_GT(total_dropped, 0u);
    EXPECT_EQ(ledger.generated_count(), ledger.delivered_count() + ledger.dropped_count());
}

TEST(Backfill, ReturnsAllWhenUnderCap)
{
    auto p = constant(10);
    SyntheticSource src("s", p, unlimited());
    src.generate(VTime{0}, VTime{1000}); // 10 records
    const auto hits = src.backfill("vote election ballot", VTime{0}, VTime{1000}, 100, VTime{5000});
    std::size_t matching = 0;
    for (std::uint64_t id = 0; id < 10; ++id)
        matching += relevance(src.payload_for(id), "vote election ballot") > 0;
    EXPECT_EQ(hits.size(), matching);
}

TEST(Backfill, TopRankedSubset)
{
    auto p = constant(200);
    SyntheticSource src("s", p, unlimited());
    src.generate(VTime{0}, VTime{2000});
    const std::string q = "vote election ballot";
    const auto hits = src.backfill(q, VTime{0}, VTime{2000}, 100, VTime{3000});
    ASSERT_EQ(hits.size(), 100u);
    // Independent ranking of every record in the window.
    std::vector<std::tuple<std::size_t, std::int64_t, std::uint64_t>> all;
    for (std::uint64_t id = 0; id < src.ledger().next_id(); ++id) {
        const auto score = relevance(src.payload_for(id), q);
        if (score > 0)
            all.emplace_back(score, src.ledger().entry(id).created_at_ms, id);
    }
    std::sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
        if (std::get<0>(a) != std::get<0>(b))
            return std::get<0>(a) > std::get<0>(b);
        if (std::get<1>(a) != std::get<1>(b))
            return std::get<1>(a) > std::get<1>(b);
        return std::get<2>(a) < std::get<2>(b);
    });
    ASSERT_GT(all.size(), 100u);
    for (std::size_t i = 0; i < 100; ++i)
        EXPECT_EQ(hits[i].record_id, std::get<2>(all[i]));
}

TEST(Backfill, IncludesRecordsDroppedAtSource)
{
    SyntheticSource src("s", constant(100), SourceLimits{});
    auto d = src.deliver(VTime{0}, kSecond);
    ASSERT_FALSE(d.dropped.empty());
    const auto hits = src.backfill("vote election ballot", VTime{0}, kSecond, 1000, VTime{2000});
    bool saw_dropped = false;
    for (const auto& r : hits)
        saw_dropped |= std::find(d.dropped.begin(), d.dropped.end(), r.record_id) != d.dropped.end();
    EXPECT_TRUE(saw_dropped);
}

TEST(Backfill, WindowOlderThanSevenDaysExpires)
{
    SyntheticSource src("s", constant(1), unlimited());
    src.generate(VTime{0}, kHour);
    EXPECT_THROW(src.backfill("vote", VTime{0}, kHour, 10, kHour + 7 * kDay), WindowExpired);
    EXPECT_NO_THROW(src.backfill("vote", VTime{0}, kHour, 10, kHour + 7 * kDay - VTime{1}));
}

TEST(Backfill, PayloadRegeneratesFromSeed)
{
    SyntheticSource src("s", constant(5), unlimited());
    const auto recs = src.generate(VTime{0}, kSecond);
    for (const auto& r : recs)
        EXPECT_EQ(src.payload_for(r.record_id), r.payload);
}

TEST(Ledger, DeliveredAndDroppedDisjoint)
{
    SyntheticSource src("s", constant(80), SourceLimits{});
    for (VTime t{0}; t < VTime{20'000}; t += kSecond)
        src.deliver(t, t + kSecond);
    const auto& l = src.ledger();
    std::size_t delivered = 0, dropped = 0;
    for (auto id = l.id_base(); id < l.next_id(); ++id) {
        delivered += l.entry(id).status == SourceStatus::delivered;
        dropped += l.entry(id).status == SourceStatus::dropped;
    }
    EXPECT_EQ(delivered, l.delivered_count());
    EXPECT_EQ(dropped, l.dropped_count());
    EXPECT_EQ(delivered + dropped, l.generated_count());
    EXPECT_EQ(delivered, 20u * 50u);
}

TEST(Profile, Validation)
{
    auto p = constant(-1);
    EXPECT_THROW(validate(p), ConfigError);
    p = sinusoid(1, 1, VTime{0});
    EXPECT_THROW(validate(p), ConfigError);
    EXPECT_THROW(parse_profile_kind("zigzag"), ConfigError);
}
