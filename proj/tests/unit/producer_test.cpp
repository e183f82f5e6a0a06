#include <gtest/gtest.h>

#include <random>

#include "intervals.hpp"
#include "smmon/producer.hpp"

using namespace smmon;

namespace {

std::vector<Record> records(std::uint64_t first_id, std::size_t n, VTime created, std::size_t size = 20)
{
    std::vector<Record> out;
    for (std::size_t i = 0; i < n; ++i) {
        Record r;
        r.record_id = first_id + i;
        r.source_id = "src";
        r.created_at = created + VTime{static_cast<std::int64_t>(i * 1000 / std::max<std::size_t>(n, 1))};
        r.payload = "vote " + std::string(size, 'x');
        out.push_back(std::move(r));
    }
    return out;
}

/// Search endpoint stub: `matching` records per window, 7-day horizon.
class StubSource : public Source {
  public:
    explicit StubSource(std::size_t matching)
        : matching_(matching)
    {
    }
    const std::string& id() const override { return id_; }
    Delivery deliver(VTime, VTime) override { return {}; }
    std::vector<Record> backfill(std::string_view, VTime from, VTime to, std::size_t max_results,
                                 VTime now) override
    {
        if (to <= now - kBackfillHorizon)
            throw WindowExpired("window older than the horizon");
        ++calls;
        auto all = records(900'000, matching_, from);
        for (auto& r : all)
            r.created_at = std::min(r.created_at, to - VTime{1});
        if (all.size() > max_results)
            all.resize(max_results);
        return all;
    }
    int calls = 0;

  private:
    std::string id_ = "stub";
    std::size_t matching_;
};

StreamConfig one_shard()
{
    StreamConfig c;
    c.min_shards = c.max_shards = 1;
    return c;
}

} // namespace

TEST(Publish, HappyPath)
{
    ShardedStream s(one_shard());
    Producer p("src");
    const auto out = p.publish_step(s, records(0, 10, VTime{0}), kSecond);
    EXPECT_EQ(out.admitted.size(), 10u);
    EXPECT_EQ(p.state().publish_successes, 10u);
    EXPECT_EQ(s.total_put(), 10u);
}

TEST(Publish, PartitionKeyFromSourceAndKeyword)
{
    Producer p("src");
    Record r;
    r.payload = "hello election day";
    EXPECT_EQ(p.partition_key_for(r), "src/election");
    r.payload = "nothing here";
    EXPECT_EQ(p.partition_key_for(r), "src/nothing");
}

TEST(Publish, TwelveHundredInOneSecond)
{
    ShardedStream s(one_shard());
    Producer p("src");
    const auto first = p.publish_step(s, records(0, 1200, VTime{0}), kSecond);
    EXPECT_LE(first.admitted.size(), 1000u);
    EXPECT_EQ(first.admitted.size() + p.pending(), 1200u);
    const auto second = p.publish_step(s, {}, 2 * kSecond);
    EXPECT_EQ(second.admitted.size() + second.throttled.size(), 200u);
    EXPECT_EQ(s.total_put() + p.state().publish_throttled, 1200u);
}

TEST(Publish, RetryBudgetExhaustedCountsThrottled)
{
    ShardedStream s(one_shard());
    ProducerConfig c;
    c.retry_budget = 1;
    Producer p("src", c);
    const auto out = p.publish_step(s, records(0, 1001, VTime{0}), kSecond);
    EXPECT_EQ(out.admitted.size(), 1000u);
    EXPECT_EQ(out.throttled.size(), 1u);
    EXPECT_EQ(p.state().publish_throttled, 1u);
    EXPECT_EQ(p.pending(), 0u);
}

TEST(Publish, OutageQueueOverflow)
{
    ShardedStream s(one_shard());
    ProducerConfig c;
    c.queue_capacity = 500;
    Producer p("src", c);
    s.set_available(false);
    const auto out = p.publish_step(s, records(0, 600, VTime{0}), kSecond);
    EXPECT_EQ(p.pending(), 500u);
    EXPECT_EQ(out.lost.size(), 100u);
    EXPECT_EQ(p.state().producer_lost, 100u);
    // Newest are dropped.
    EXPECT_EQ(out.lost.front(), 500u);
    s.set_available(true);
    const auto after = p.publish_step(s, {}, 2 * kSecond);
    EXPECT_EQ(after.admitted.size(), 500u);
    EXPECT_EQ(after.admitted.front(), 0u);
}

TEST(Publish, DisconnectedRejectsBatch)
{
    ShardedStream s(one_shard());
    Producer p("src");
    p.set_connected(false, VTime{0});
    EXPECT_THROW(p.publish_step(s, records(0, 1, VTime{0}), kSecond), std::logic_error);
    EXPECT_NO_THROW(p.publish_step(s, {}, kSecond));
}

TEST(Publish, NoSilentLossAndOrderUnderRandomFaults)
{
    std::mt19937_64 rng(5);
    ShardedStream s(one_shard());
    ProducerConfig c;
    c.queue_capacity = 800;
    c.retry_budget = 1;
    Producer p("src", c);
    std::vector<std::uint64_t> admitted;
    std::uint64_t received = 0, throttled = 0, lost = 0, next_id = 0;
    for (int t = 1; t <= 400; ++t) {
        s.set_available(rng() % 5 != 0);
        const std::size_t n = rng() % 2400;
        auto out = p.publish_step(s, records(next_id, n, VTime{(t - 1) * 1000}), VTime{t * 1000});
        next_id += n;
        received += n;
        admitted.insert(admitted.end(), out.admitted.begin(), out.admitted.end());
        throttled += out.throttled.size();
        lost += out.lost.size();
        ASSERT_EQ(received, admitted.size() + throttled + lost + p.pending());
        ASSERT_LE(p.state().publish_successes + p.state().publish_throttled, p.state().publish_attempts);
    }
    EXPECT_TRUE(std::is_sorted(admitted.begin(), admitted.end()));
    EXPECT_EQ(s.total_put(), admitted.size());
    EXPECT_GT(throttled, 0u);
    EXPECT_GT(lost, 0u);
}

TEST(Gaps, NoneWithoutOutage)
{
    Producer p("src");
    EXPECT_TRUE(p.detect_gap().empty());
}

TEST(Gaps, SingleOutageReadback)
{
    Producer p("src");
    p.set_connected(false, 100 * kSecond);
    EXPECT_TRUE(p.detect_gap().empty());
    p.set_connected(true, 160 * kSecond);
    const auto gaps = p.detect_gap();
    ASSERT_EQ(gaps.size(), 1u);
    EXPECT_EQ(gaps[0], (Interval{100 * kSecond, 160 * kSecond}));
}

TEST(Gaps, OverlappingOutagesMerge)
{
    Producer p("src");
    p.record_outage({100 * kSecond, 200 * kSecond});
    p.record_outage({150 * kSecond, 250 * kSecond});
    const auto gaps = p.detect_gap();
    ASSERT_EQ(gaps.size(), 1u);
    EXPECT_EQ(gaps[0], (Interval{100 * kSecond, 250 * kSecond}));
}

TEST(Gaps, RandomOutagesMatchUnionOracle)
{
    std::mt19937_64 rng(17);
    for (int round = 0; round < 50; ++round) {
        Producer p("src");
        std::vector<std::pair<std::int64_t, std::int64_t>> spans;
        for (int i = 0; i < 12; ++i) {
            const std::int64_t a = rng() % 1000, len = 1 + rng() % 80;
            spans.emplace_back(a, a + len);
            p.record_outage({VTime{a}, VTime{a + len}});
        }
        const auto expect = oracle::union_by_scan(spans, 1100);
        const auto got = p.detect_gap();
        ASSERT_EQ(got.size(), expect.size());
        for (std::size_t i = 0; i < got.size(); ++i) {
            EXPECT_EQ(got[i].start.count(), expect[i].first);
            EXPECT_EQ(got[i].end.count(), expect[i].second);
        }
        for (std::size_t i = 1; i < got.size(); ++i)
            EXPECT_LT(got[i - 1].end, got[i].start);
    }
}

TEST(Repair, ThirtyOfCapHundred)
{
    ShardedStream s(one_shard());
    Producer p("src");
    StubSource src(30);
    p.record_outage({100 * kSecond, 160 * kSecond});
    const auto r = p.repair_gap(s, src, {100 * kSecond, 160 * kSecond}, "vote", 100, 200 * kSecond);
    EXPECT_EQ(r.recovered, 30u);
    EXPECT_EQ(r.status, GapStatus::repaired);
    EXPECT_TRUE(p.detect_gap().empty());
    const auto got = s.get_records({"s0", 0}, 100, 200 * kSecond);
    ASSERT_EQ(got.records.size(), 30u);
    EXPECT_EQ(got.records.front()->put_at, 200 * kSecond);
}

TEST(Repair, TwoHundredOfCapHundredIsPartial)
{
    ShardedStream s(one_shard());
    Producer p("src");
    StubSource src(200);
    p.record_outage({100 * kSecond, 160 * kSecond});
    const auto r = p.repair_gap(s, src, {100 * kSecond, 160 * kSecond}, "vote", 100, 200 * kSecond);
    EXPECT_EQ(r.recovered, 100u);
    EXPECT_EQ(r.status, GapStatus::partially_repaired);
}

TEST(Repair, OlderThanHorizonIsPermanent)
{
    ShardedStream s(one_shard());
    Producer p("src");
    StubSource src(30);
    p.record_outage({VTime{0}, kHour});
    const auto r = p.repair_gap(s, src, {VTime{0}, kHour}, "vote", 100, 8 * kDay);
    EXPECT_EQ(r.recovered, 0u);
    EXPECT_EQ(r.status, GapStatus::permanently_incomplete);
    EXPECT_TRUE(p.detect_gap().empty());
    EXPECT_EQ(p.state().outage_log[0].status, GapStatus::permanently_incomplete);
}

TEST(Repair, UnknownWindowRejected)
{
    ShardedStream s(one_shard());
    Producer p("src");
    StubSource src(1);
    EXPECT_THROW(p.repair_gap(s, src, {VTime{0}, kSecond}, "vote", 10, kSecond), std::invalid_argument);
}
