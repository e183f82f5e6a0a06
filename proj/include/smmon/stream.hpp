#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <iosfwd>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "smmon/model.hpp"
#include "smmon/time.hpp"
#include "smmon/token_bucket.hpp"

namespace smmon {

enum class ShardState { open, closed };

/// Inclusive bounds over the 64-bit partition-key hash space.
struct HashRange {
    std::uint64_t low = 0;
    std::uint64_t high = ~std::uint64_t{0};

    bool contains(std::uint64_t h) const noexcept { return h >= low && h <= high; }
    friend bool operator==(const HashRange&, const HashRange&) = default;
};

enum class PutVerdict { accepted, throttled, project_throttled, unavailable };

std::string to_string(PutVerdict v);

struct PutResult {
    PutVerdict verdict;
    std::string shard_id;      ///< shard the key routed to
    std::uint64_t sequence = 0; ///< valid when accepted

    bool accepted() const noexcept { return verdict == PutVerdict::accepted; }
};

/// One admission decision, in the order they were made.
struct AdmitEntry {
    VTime now;
    std::string shard_id;
    PutVerdict verdict;
    std::uint64_t size_bytes;
};

/// "now_ms,shard_id,verdict,size_bytes"
std::string format_admit_line(const AdmitEntry& e);
AdmitEntry parse_admit_line(const std::string& line);

struct ShardIterator {
    std::string shard_id;
    std::uint64_t next_sequence = 0;
};

enum class ReadStatus { ok, throttled };

struct ReadResult {
    ReadStatus status = ReadStatus::ok;
    std::vector<RecordPtr> records;
    ShardIterator next;
};

/// Read-only view of one shard's metadata.
struct ShardInfo {
    std::string shard_id;
    ShardState state;
    HashRange range;
    VTime created_at;
    std::optional<VTime> closed_at;
    std::uint64_t first_sequence; ///< oldest sequence still stored
    std::uint64_t next_sequence;  ///< sequence the next admitted record gets
    std::size_t stored;           ///< records currently held
    std::optional<VTime> oldest_put_at;
};

/// Per-shard usage over one metric window.
struct ShardUsage {
    double records_per_sec = 0;
    double bytes_per_sec = 0;
};

struct MetricsWindow {
    VTime window{0};
    VTime end{0};
    std::map<std::string, ShardUsage> per_shard; ///< every open shard
    ShardUsage avg_per_open_shard;
    int open_shards = 0;
};

struct StreamConfig {
    std::string stream_id = "stream";
    ShardLimits limits;
    RetentionPolicy retention;
    ProjectLimits project;
    int min_shards = 1;
    int max_shards = 16;
};

/// An ordered, sharded, rate-limited, retention-bounded log.
///
/// Routing hashes the partition key with FNV-1a 64 and picks the unique open
/// shard whose range contains the hash. All per-second limits are token
/// buckets holding exactly one second of budget with continuous refill. Write
/// admission checks the shard's record and byte buckets, then the project
/// byte bucket; nothing is debited unless every check passes.
///
/// All public members are safe to call concurrently.
class ShardedStream {
  public:
    explicit ShardedStream(StreamConfig config, VTime now = VTime{0});

    ShardedStream(const ShardedStream&) = delete;
    ShardedStream& operator=(const ShardedStream&) = delete;

    /// Throws std::invalid_argument on an empty partition key and
    /// OversizeRecord above 1 MiB.
    PutResult put(const Record& record, VTime now);

    /// Unexpired records at or after the iterator, in sequence order, bounded
    /// by `max_records` and the read byte budget. Throws ShardNotFound for an
    /// id the stream never had.
    ReadResult get_records(const ShardIterator& it, std::size_t max_records, VTime now);

    /// Iterator at the oldest record still stored in the shard.
    ShardIterator trim_horizon(const std::string& shard_id) const;

    /// Drops every record with put_at + retention <= now; collects closed shards
    /// left empty. Returns the number of records expired.
    std::size_t expire(VTime now);

    /// Closes `shard_id` and opens two children over the halves of its range.
    /// Throws ScaleRefused at max_shards or when the shard is closed.
    std::pair<std::string, std::string> split_shard(const std::string& shard_id, VTime now);

    /// Closes two open shards with adjacent ranges and opens one child over
    /// their union. Throws ScaleRefused at min_shards or for non-adjacent ranges.
    std::string merge_shards(const std::string& a, const std::string& b, VTime now);

    /// Usage since the previous call, averaged over `window`.
    MetricsWindow collect_metrics(VTime window, VTime now);

    /// Administrative read of [first, last] bypassing rate limits. Empty if any
    /// record of the range has expired or never existed.
    std::optional<std::vector<RecordPtr>> scan(const std::string& shard_id, std::uint64_t first,
                                               std::uint64_t last, VTime now);

    /// Shard the key currently routes to.
    std::string route(const std::string& partition_key) const;

    std::vector<ShardInfo> shards() const;
    std::optional<ShardInfo> shard(const std::string& shard_id) const;
    /// Final next_sequence of shards that were garbage-collected.
    std::map<std::string, std::uint64_t> retired_shards() const;
    int open_shard_count() const;

    /// Injected outage: puts answer `unavailable` while false.
    void set_available(bool available);
    bool available() const;

    using AdmitObserver = std::function<void(const AdmitEntry&)>;
    void set_admit_observer(AdmitObserver observer);

    std::uint64_t total_put() const;
    std::uint64_t total_expired() const;
    std::uint64_t total_throttled() const;
    std::uint64_t readable_count() const;
    std::uint64_t bytes_put() const;
    std::uint64_t bytes_read() const;

    const StreamConfig& config() const noexcept { return config_; }
    const std::string& id() const noexcept { return config_.stream_id; }

    /// Human-readable state: one line per shard plus counters.
    void write_snapshot(std::ostream& out) const;

  private:
    struct Shard {
        std::string id;
        ShardState state = ShardState::open;
        HashRange range;
        VTime created_at{0};
        std::optional<VTime> closed_at;
        std::deque<RecordPtr> records;
        std::uint64_t base_sequence = 0; ///< sequence of records.front()
        std::uint64_t next_sequence = 0;
        TokenBucket write_records;
        TokenBucket write_bytes;
        TokenBucket read_requests;
        TokenBucket read_bytes;
        std::uint64_t window_records = 0;
        std::uint64_t window_bytes = 0;
    };

    Shard& open_new_shard(HashRange range, VTime now);
    Shard* find(const std::string& id);
    const Shard* find(const std::string& id) const;
    Shard& route_locked(std::uint64_t hash);
    std::size_t expire_shard(Shard& s, VTime now);
    void collect_garbage();
    void check_partition() const;
    static ShardInfo info(const Shard& s);

    StreamConfig config_;
    mutable std::mutex mu_;
    std::map<std::uint64_t, Shard> shards_;            ///< keyed by shard number
    std::map<std::uint64_t, std::uint64_t> open_by_low_; ///< range.low -> shard number
    std::map<std::string, std::uint64_t> retired_;
    std::uint64_t next_shard_number_ = 0;
    TokenBucket project_write_;
    TokenBucket project_read_;
    bool available_ = true;
    AdmitObserver observer_;
    std::uint64_t total_put_ = 0;
    std::uint64_t total_expired_ = 0;
    std::uint64_t total_throttled_ = 0;
    std::uint64_t bytes_put_ = 0;
    std::uint64_t bytes_read_ = 0;
    VTime last_collect_{0};
};

} // namespace smmon
