#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "smmon/model.hpp"
#include "smmon/stream.hpp"

namespace smmon {

/// Consecutive records read from one shard.
struct Batch {
    std::string shard_id;
    std::vector<RecordPtr> records;
};

// ---------------------------------------------------------------------------
// Record line format shared by hot-object dumps and archive segments:
//   record_id \t shard_id \t sequence \t created_at_ms \t put_at_ms \t partition_key \t base64(payload)

std::string format_record_line(const Record& r, std::string_view shard_id);

struct ArchivedRecord {
    std::uint64_t record_id = 0;
    std::string shard_id;
    std::uint64_t sequence = 0;
    VTime created_at{0};
    VTime put_at{0};
    std::string partition_key;
    std::string payload;
};

ArchivedRecord parse_record_line(std::string_view line);

// ---------------------------------------------------------------------------
// Hot object store

struct HotObject {
    std::string key;
    std::string shard_id;
    std::uint64_t first_sequence = 0;
    std::uint64_t last_sequence = 0;
    VTime written_at{0};
    VTime min_created{0};
    VTime max_created{0};
    std::vector<RecordPtr> records; ///< empty once purged or lost
    bool present = true;
    bool archived = false;
};

struct HotStoreConfig {
    /// Objects at least this old are moved to the archive by a sweep.
    VTime archive_age = kHour;
    /// Archived objects are purged this long after being written.
    VTime retention = 24 * kHour;
};

/// Staging area between the consumer and the archive. Also holds the
/// consumer's checkpoint. Metadata of every object ever written is kept after
/// the content is purged, so lost objects can be rebuilt.
class HotStore {
  public:
    explicit HotStore(std::string stream_id, HotStoreConfig config = {});

    /// "<stream_id>/<shard_id>/<first>-<last>"
    static std::string object_key(std::string_view stream_id, std::string_view shard_id, std::uint64_t first,
                                  std::uint64_t last);

    /// Writes the batch and returns its key, or nothing during an outage.
    /// Re-staging an existing key overwrites it in place. Throws CorruptBatch
    /// for an empty, mixed-shard, or non-contiguous batch.
    std::optional<std::string> stage(const Batch& batch, VTime now);

    const HotObject* get(const std::string& key) const;

    /// Present object holding (shard, sequence), if any.
    const HotObject* find(const std::string& shard_id, std::uint64_t sequence) const;

    /// Objects not yet archived with written_at + archive_age <= now (or all
    /// of them when `force`), in key order.
    std::vector<const HotObject*> due_for_archive(VTime now, bool force) const;

    void mark_archived(const std::vector<std::string>& keys);

    /// Drops the content of archived objects past retention.
    std::size_t purge(VTime now);

    /// Drops an object's content as if it had been lost.
    bool erase(const std::string& key);

    /// Reinstates content for a known key.
    void restore(const std::string& key, std::vector<RecordPtr> records);

    /// Records of one object in record-line format.
    std::string serialize(const std::string& key) const;

    const std::map<std::string, HotObject>& objects() const noexcept { return objects_; }
    std::size_t present_count() const;

    /// Returns false during an outage.
    bool put_checkpoint(std::string text);
    std::optional<std::string> checkpoint() const { return checkpoint_; }

    void set_available(bool available) { available_ = available; }
    bool available() const noexcept { return available_; }

    const std::string& stream_id() const noexcept { return stream_id_; }
    const HotStoreConfig& config() const noexcept { return config_; }
    std::uint64_t bytes_written() const noexcept { return bytes_written_; }

  private:
    std::string stream_id_;
    HotStoreConfig config_;
    std::map<std::string, HotObject> objects_;
    std::unordered_map<std::string, std::map<std::uint64_t, std::string>> by_shard_;
    std::optional<std::string> checkpoint_;
    bool available_ = true;
    std::uint64_t bytes_written_ = 0;
};

// ---------------------------------------------------------------------------
// Summary table

struct SummaryRow {
    std::int64_t bucket_minute = 0;
    std::string keyword;
    std::uint64_t record_count = 0;
    std::uint64_t byte_count = 0;

    friend bool operator==(const SummaryRow&, const SummaryRow&) = default;
};

/// Keyword assigned to records carrying none of the configured keywords.
inline constexpr std::string_view kNoKeyword = "-";

/// Per-minute, per-keyword record and byte counts of staged objects.
class SummaryTable {
  public:
    explicit SummaryTable(std::vector<std::string> keywords);

    /// Folds an object's records into the table; a key already folded in is
    /// a no-op. Returns the rows touched, with their new totals.
    std::vector<SummaryRow> summarize(const HotObject& object);

    /// Removes rows with bucket in [from_minute, to_minute).
    void erase_buckets(std::int64_t from_minute, std::int64_t to_minute);

    /// Adds counts without the idempotence bookkeeping (used by recovery).
    void add(std::int64_t bucket_minute, const std::string& keyword, std::uint64_t records, std::uint64_t bytes);

    std::vector<SummaryRow> rows() const;
    std::uint64_t total_records() const;
    const std::set<std::string>& summarized_keys() const noexcept { return summarized_; }
    const std::vector<std::string>& keywords() const noexcept { return keywords_; }

    std::string keyword_of(const Record& r) const;

    /// "bucket_minute,keyword,record_count,byte_count" per row, sorted.
    void write_csv(std::ostream& out) const;

  private:
    std::vector<std::string> keywords_;
    std::map<std::pair<std::int64_t, std::string>, std::pair<std::uint64_t, std::uint64_t>> rows_;
    std::set<std::string> summarized_;
};

// ---------------------------------------------------------------------------
// Cold archive

struct ArchiveKey {
    std::string shard_id;
    std::uint64_t sequence = 0;
    std::uint64_t record_id = 0;
};

struct ArchiveSegment {
    std::string path; ///< relative to the archive root
    VTime min_created{0};
    VTime max_created{0};
    std::vector<ArchiveKey> keys; ///< in file order
};

/// Set of 64-bit ids stored as 64 Ki-bit pages.
class IdSet {
  public:
    bool insert(std::uint64_t id);
    bool contains(std::uint64_t id) const;
    std::size_t size() const noexcept { return size_; }

  private:
    std::unordered_map<std::uint64_t, std::vector<std::uint64_t>> pages_;
    std::size_t size_ = 0;
};

/// Long-term store: deduplicated, created_at-sorted segments under
/// "<root>/YYYY-MM-DD-simulated/segment-N".
class ColdArchive {
  public:
    explicit ColdArchive(std::filesystem::path root);

    bool contains(const std::string& shard_id, std::uint64_t sequence) const;
    bool contains_record(std::uint64_t record_id) const { return record_ids_.contains(record_id); }
    std::size_t record_count() const noexcept { return record_ids_.size(); }

    const std::vector<ArchiveSegment>& segments() const noexcept { return segments_; }
    const std::filesystem::path& root() const noexcept { return root_; }

    /// Removes a segment file as if the storage lost it. The catalog entry stays.
    bool delete_segment(const std::string& path);

    void set_available(bool available) { available_ = available; }
    bool available() const noexcept { return available_; }

    /// Writes new segments for `records` (already deduplicated and sorted),
    /// one per simulated day. All-or-nothing: on failure no file remains and
    /// the index is untouched.
    bool write_segments(const std::vector<std::pair<RecordPtr, std::string>>& records);

    /// Rewrites a cataloged segment from the given records (file order).
    bool rewrite_segment(const ArchiveSegment& segment, const std::vector<std::pair<RecordPtr, std::string>>& records);

    std::uint64_t bytes_written() const noexcept { return bytes_written_; }

  private:
    std::filesystem::path root_;
    std::vector<ArchiveSegment> segments_;
    /// shard -> disjoint runs [first, last] of archived sequences
    std::unordered_map<std::string, std::map<std::uint64_t, std::uint64_t>> sequences_;
    IdSet record_ids_;
    std::uint64_t next_segment_ = 0;
    bool available_ = true;
    std::uint64_t bytes_written_ = 0;
};

struct SweepResult {
    bool ok = true;
    std::size_t segments_written = 0;
    std::size_t objects_retired = 0;
    std::size_t records_archived = 0;
    std::size_t duplicates_dropped = 0;
};

/// Moves due hot objects into new archive segments, dropping any record whose
/// (shard_id, sequence) or record_id is already archived. On a cold-store
/// failure the hot objects stay un-archived and are retried next sweep.
SweepResult archive_sweep(HotStore& hot, ColdArchive& cold, VTime now, bool force = false);

// ---------------------------------------------------------------------------
// Tier recovery

enum class Tier { stream, hot, summary, archive };

std::string to_string(Tier t);
Tier parse_tier(const std::string& text);

struct UnrecoverableRange {
    Tier tier;
    std::string item; ///< object key, segment path, or bucket range
    Interval range;
    std::size_t missing = 0;
};

struct RecoveryReport {
    std::size_t restored = 0;
    std::vector<UnrecoverableRange> unrecoverable;
};

struct StorageTiers {
    HotStore& hot;
    SummaryTable& summary;
    ColdArchive& cold;
};

/// Rebuilds `target` for `range` from the adjacent upstream tier:
///   hot <- stream      (objects with written_at in range)
///   summary <- hot     (buckets whose minute start lies in range)
///   archive <- hot | stream (segments overlapping range by created_at)
/// Anything the upstream no longer holds is reported as unrecoverable.
RecoveryReport recover_tier(Tier target, Tier source, Interval range, StorageTiers tiers, ShardedStream& stream,
                            VTime now);

} // namespace smmon
