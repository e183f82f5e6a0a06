#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "smmon/storage.hpp"

using namespace smmon;
namespace fs = std::filesystem;

namespace {

RecordPtr rec(std::uint64_t id, std::uint64_t seq, VTime created, std::string payload = "vote hello")
{
    auto r = std::make_shared<Record>();
    r->record_id = id;
    r->sequence = seq;
    r->created_at = created;
    r->put_at = created;
    r->partition_key = "src/vote";
    r->payload = std::move(payload);
    return r;
}

Batch batch(std::string shard, std::uint64_t first, std::uint64_t last, VTime created = VTime{0},
            std::uint64_t id_base = 0)
{
    Batch b{std::move(shard), {}};
    for (auto s = first; s <= last; ++s)
        b.records.push_back(rec(id_base + s, s, created + VTime{static_cast<std::int64_t>(s)}));
    return b;
}

fs::path scratch(const std::string& name)
{
    auto p = fs::temp_directory_path() / ("smmon-storage-" + name + "-" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

/// Every line of every segment file under root, sorted.
std::vector<std::string> archive_lines(const fs::path& root)
{
    std::vector<std::string> lines;
    for (const auto& e : fs::recursive_directory_iterator(root)) {
        if (!e.is_regular_file())
            continue;
        std::ifstream in(e.path());
        for (std::string l; std::getline(in, l);)
            lines.push_back(l);
    }
    std::sort(lines.begin(), lines.end());
    return lines;
}

} // namespace

TEST(RecordLine, RoundTripWithTabsInPayload)
{
    auto r = rec(42, 7, VTime{1234}, "vote\tline\nbreak \xff");
    const auto line = format_record_line(*r, "s3");
    EXPECT_EQ(line.find('\n'), std::string::npos);
    const auto back = parse_record_line(line);
    EXPECT_EQ(back.record_id, 42u);
    EXPECT_EQ(back.shard_id, "s3");
    EXPECT_EQ(back.sequence, 7u);
    EXPECT_EQ(back.created_at, VTime{1234});
    EXPECT_EQ(back.payload, r->payload);
    EXPECT_THROW(parse_record_line("1\t2\t3"), std::invalid_argument);
}

TEST(Stage, KeyConstruction)
{
    HotStore hot("stream");
    EXPECT_EQ(hot.stage(batch("s1", 0, 99), kSecond), std::optional<std::string>("stream/s1/0-99"));
}

TEST(Stage, RetryOverwritesSameKey)
{
    HotStore hot("stream");
    const auto a = hot.stage(batch("s1", 0, 99), kSecond);
    const auto b = hot.stage(batch("s1", 0, 99), 2 * kSecond);
    EXPECT_EQ(a, b);
    EXPECT_EQ(hot.objects().size(), 1u);
    EXPECT_EQ(hot.get(*a)->written_at, kSecond);
}

TEST(Stage, CorruptBatchesRejected)
{
    HotStore hot("stream");
    EXPECT_THROW(hot.stage(Batch{"s1", {}}, kSecond), CorruptBatch);
    EXPECT_THROW(hot.stage(Batch{"", batch("s1", 0, 1).records}, kSecond), CorruptBatch);
    auto gap = batch("s1", 0, 3);
    gap.records.erase(gap.records.begin() + 1);
    EXPECT_THROW(hot.stage(gap, kSecond), CorruptBatch);
    EXPECT_TRUE(hot.objects().empty());
}

TEST(Stage, OutageRejectsThenAccepts)
{
    HotStore hot("stream");
    hot.set_available(false);
    EXPECT_FALSE(hot.stage(batch("s1", 0, 9), kSecond));
    EXPECT_FALSE(hot.put_checkpoint("x"));
    hot.set_available(true);
    EXPECT_TRUE(hot.stage(batch("s1", 0, 9), 2 * kSecond));
}

TEST(Stage, FindBySequence)
{
    HotStore hot("stream");
    hot.stage(batch("s1", 0, 9), kSecond);
    hot.stage(batch("s1", 10, 19), kSecond);
    ASSERT_TRUE(hot.find("s1", 15));
    EXPECT_EQ(hot.find("s1", 15)->key, "stream/s1/10-19");
    EXPECT_EQ(hot.find("s1", 20), nullptr);
    EXPECT_EQ(hot.find("s2", 0), nullptr);
}

TEST(Summary, CountsPerMinuteAndKeyword)
{
    HotStore hot("stream");
    Batch b{"s0", {}};
    for (int i = 0; i < 10; ++i)
        b.records.push_back(rec(i, i, 5 * kMinute + VTime{i}, "vote " + std::string(i, 'x')));
    b.records.push_back(rec(10, 10, 5 * kMinute, "nothing"));
    const auto key = hot.stage(b, 6 * kMinute);
    SummaryTable t({"vote", "ballot"});
    t.summarize(*hot.get(*key));
    std::uint64_t bytes = 0;
    for (int i = 0; i < 10; ++i)
        bytes += 5 + i;
    const auto rows = t.rows();
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0], (SummaryRow{5, "-", 1, 7}));
    EXPECT_EQ(rows[1], (SummaryRow{5, "vote", 10, bytes}));
    EXPECT_TRUE(t.summarize(*hot.get(*key)).empty());
    EXPECT_EQ(t.rows(), rows);
}

TEST(Summary, NegativeTimesFloor)
{
    HotStore hot("stream");
    const auto key = hot.stage(Batch{"s0", {rec(1, 0, VTime{-1})}}, VTime{0});
    SummaryTable t({"vote"});
    t.summarize(*hot.get(*key));
    EXPECT_EQ(t.rows().at(0).bucket_minute, -1);
}

TEST(Sweep, EmptyHotWritesNothing)
{
    const auto dir = scratch("empty");
    HotStore hot("stream");
    ColdArchive cold(dir / "archive");
    const auto r = archive_sweep(hot, cold, kDay);
    EXPECT_TRUE(r.ok);
    EXPECT_EQ(r.segments_written, 0u);
}

TEST(Sweep, OverlappingDuplicatesRemoved)
{
    const auto dir = scratch("dupes");
    HotStore hot("stream");
    ColdArchive cold(dir / "archive");
    hot.stage(batch("s0", 0, 49), VTime{0});
    hot.stage(batch("s0", 30, 79), VTime{0});
    const auto r = archive_sweep(hot, cold, 2 * kHour);
    EXPECT_EQ(r.segments_written, 1u);
    EXPECT_EQ(r.records_archived, 80u);
    EXPECT_EQ(r.duplicates_dropped, 20u);
    const auto lines = archive_lines(dir / "archive");
    ASSERT_EQ(lines.size(), 80u);
    std::set<std::uint64_t> seqs;
    for (const auto& l : lines)
        seqs.insert(parse_record_line(l).sequence);
    EXPECT_EQ(seqs.size(), 80u);
    EXPECT_TRUE(fs::exists(dir / "archive" / "1970-01-01-simulated" / "segment-0"));
}

TEST(Sweep, BackfillDuplicatesRemovedByRecordId)
{
    const auto dir = scratch("ids");
    HotStore hot("stream");
    ColdArchive cold(dir / "archive");
    hot.stage(batch("s0", 0, 9, VTime{0}, 100), VTime{0});
    hot.stage(batch("s1", 0, 9, VTime{0}, 100), VTime{0});
    const auto r = archive_sweep(hot, cold, 2 * kHour);
    EXPECT_EQ(r.records_archived, 10u);
    EXPECT_EQ(r.duplicates_dropped, 10u);
}

TEST(Sweep, OnlyObjectsOlderThanAge)
{
    const auto dir = scratch("age");
    HotStore hot("stream");
    ColdArchive cold(dir / "archive");
    hot.stage(batch("s0", 0, 9), VTime{0});
    hot.stage(batch("s0", 10, 19), 30 * kMinute);
    EXPECT_EQ(archive_sweep(hot, cold, kHour).records_archived, 10u);
    EXPECT_EQ(archive_sweep(hot, cold, kHour, true).records_archived, 10u);
}

TEST(Sweep, ColdFailureKeepsHot)
{
    const auto dir = scratch("coldfail");
    HotStore hot("stream");
    ColdArchive cold(dir / "archive");
    hot.stage(batch("s0", 0, 9), VTime{0});
    cold.set_available(false);
    const auto r = archive_sweep(hot, cold, 2 * kHour);
    EXPECT_FALSE(r.ok);
    EXPECT_EQ(hot.present_count(), 1u);
    EXPECT_FALSE(hot.objects().begin()->second.archived);
    cold.set_available(true);
    EXPECT_EQ(archive_sweep(hot, cold, 3 * kHour).records_archived, 10u);
}

TEST(Sweep, UnwritableRootFailsWithoutIndexing)
{
    const auto dir = scratch("ro");
    std::ofstream(dir / "archive") << "not a directory";
    HotStore hot("stream");
    ColdArchive cold(dir / "archive");
    hot.stage(batch("s0", 0, 9), VTime{0});
    EXPECT_FALSE(archive_sweep(hot, cold, 2 * kHour).ok);
    EXPECT_EQ(cold.record_count(), 0u);
    EXPECT_FALSE(cold.contains("s0", 0));
}

TEST(Sweep, PurgeAfterRetention)
{
    const auto dir = scratch("purge");
    HotStore hot("stream");
    ColdArchive cold(dir / "archive");
    hot.stage(batch("s0", 0, 9), VTime{0});
    archive_sweep(hot, cold, 2 * kHour);
    EXPECT_EQ(hot.purge(24 * kHour - VTime{1}), 0u);
    EXPECT_EQ(hot.purge(24 * kHour), 1u);
    EXPECT_EQ(hot.present_count(), 0u);
}

TEST(Sweep, RandomRetriesNeverDuplicateKeys)
{
    std::mt19937_64 rng(12);
    const auto dir = scratch("random");
    HotStore hot("stream");
    ColdArchive cold(dir / "archive");
    std::uint64_t next[3] = {0, 0, 0};
    for (int round = 0; round < 200; ++round) {
        const int shard = rng() % 3;
        const std::uint64_t back = std::min<std::uint64_t>(next[shard], rng() % 20);
        const auto first = next[shard] - back;
        const auto last = first + rng() % 30 + back;
        hot.stage(batch("s" + std::to_string(shard), first, last, VTime{round * 60'000},
                        static_cast<std::uint64_t>(shard) << 32),
                  VTime{round * 60'000});
        next[shard] = std::max(next[shard], last + 1);
        if (round % 17 == 0)
            archive_sweep(hot, cold, VTime{round * 60'000});
    }
    archive_sweep(hot, cold, kDay, true);
    std::set<std::pair<std::string, std::uint64_t>> keys;
    std::size_t lines = 0;
    for (const auto& l : archive_lines(dir / "archive")) {
        const auto r = parse_record_line(l);
        keys.insert({r.shard_id, r.sequence});
        ++lines;
    }
    EXPECT_EQ(keys.size(), lines);
    EXPECT_EQ(lines, next[0] + next[1] + next[2]);
}

TEST(RecoverTier, ArchiveSegmentFromHotIsByteIdentical)
{
    const auto dir = scratch("rec-archive");
    StreamConfig sc;
    ShardedStream stream(sc);
    HotStore hot("stream");
    SummaryTable summary({"vote"});
    ColdArchive cold(dir / "archive");
    hot.stage(batch("s0", 0, 99), VTime{0});
    archive_sweep(hot, cold, 2 * kHour);
    const auto path = dir / "archive" / cold.segments().at(0).path;
    const auto original = slurp(path);
    ASSERT_TRUE(cold.delete_segment(cold.segments().at(0).path));
    EXPECT_FALSE(fs::exists(path));
    const auto rep = recover_tier(Tier::archive, Tier::hot, {VTime{0}, kDay}, {hot, summary, cold}, stream,
                                  3 * kHour);
    EXPECT_EQ(rep.restored, 100u);
    EXPECT_TRUE(rep.unrecoverable.empty());
    EXPECT_EQ(slurp(path), original);
}

TEST(RecoverTier, HotFromStreamReplay)
{
    StreamConfig sc;
    sc.min_shards = sc.max_shards = 1;
    ShardedStream stream(sc);
    for (int i = 0; i < 50; ++i) {
        Record r;
        r.record_id = i;
        r.partition_key = "k";
        r.payload = "vote " + std::to_string(i);
        r.created_at = VTime{i};
        stream.put(r, kSecond);
    }
    HotStore hot("stream");
    SummaryTable summary({"vote"});
    ColdArchive cold(scratch("rec-hot") / "archive");
    const auto got = stream.get_records({"s0", 0}, 1000, kSecond);
    const auto key = *hot.stage(Batch{"s0", got.records}, 2 * kSecond);
    const auto original = hot.serialize(key);
    ASSERT_TRUE(hot.erase(key));
    const auto rep = recover_tier(Tier::hot, Tier::stream, {VTime{0}, kHour}, {hot, summary, cold}, stream, kHour);
    EXPECT_EQ(rep.restored, 50u);
    EXPECT_EQ(hot.serialize(key), original);
}

TEST(RecoverTier, SummaryFromHot)
{
    HotStore hot("stream");
    SummaryTable summary({"vote"});
    ColdArchive cold(scratch("rec-sum") / "archive");
    StreamConfig sc;
    ShardedStream stream(sc);
    const auto key = *hot.stage(batch("s0", 0, 99, kMinute), 2 * kMinute);
    summary.summarize(*hot.get(key));
    const auto before = summary.rows();
    summary.erase_buckets(0, 100);
    EXPECT_TRUE(summary.rows().empty());
    const auto rep = recover_tier(Tier::summary, Tier::hot, {VTime{0}, kHour}, {hot, summary, cold}, stream,
                                  kHour);
    EXPECT_TRUE(rep.unrecoverable.empty());
    EXPECT_EQ(summary.rows(), before);
}

TEST(RecoverTier, BeyondRetentionIsUnrecoverable)
{
    const auto dir = scratch("rec-lost");
    StreamConfig sc;
    ShardedStream stream(sc);
    HotStore hot("stream");
    SummaryTable summary({"vote"});
    ColdArchive cold(dir / "archive");
    hot.stage(batch("s0", 0, 9), VTime{0});
    archive_sweep(hot, cold, 2 * kHour);
    hot.purge(25 * kHour);
    cold.delete_segment(cold.segments().at(0).path);
    const auto rep = recover_tier(Tier::archive, Tier::hot, {VTime{0}, kDay}, {hot, summary, cold}, stream,
                                  26 * kHour);
    EXPECT_EQ(rep.restored, 0u);
    ASSERT_FALSE(rep.unrecoverable.empty());
    EXPECT_EQ(rep.unrecoverable[0].missing, 10u);
}

TEST(RecoverTier, UnsupportedPairRejected)
{
    StreamConfig sc;
    ShardedStream stream(sc);
    HotStore hot("stream");
    SummaryTable summary({"vote"});
    ColdArchive cold(scratch("rec-bad") / "archive");
    EXPECT_THROW(recover_tier(Tier::hot, Tier::archive, {VTime{0}, kHour}, {hot, summary, cold}, stream, kHour),
                 std::invalid_argument);
}

TEST(RecoverTier, TierNames)
{
    for (auto t : {Tier::stream, Tier::hot, Tier::summary, Tier::archive})
        EXPECT_EQ(parse_tier(to_string(t)), t);
    EXPECT_THROW(parse_tier("tape"), std::invalid_argument);
}
