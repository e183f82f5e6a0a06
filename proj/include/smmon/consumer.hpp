#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "smmon/storage.hpp"
#include "smmon/stream.hpp"

namespace smmon {

/// Per-shard consumed positions. A shard without an entry has had nothing
/// delivered yet.
struct Checkpoint {
    std::string stream_id;
    std::map<std::string, std::uint64_t> positions; ///< shard_id -> last delivered sequence
    VTime committed_at{0};

    friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// Header "checkpoint\t<stream_id>\t<committed_at_ms>", then one
/// "shard_id\tsequence" line per shard in shard_id order.
std::string format_checkpoint(const Checkpoint& c);
Checkpoint parse_checkpoint(std::string_view text);

struct ConsumerConfig {
    std::size_t max_records_per_request = 1000;
};

/// One storage acknowledgment (or rejection) of a staged batch.
struct AckEntry {
    VTime time{0};
    std::string shard_id;
    std::uint64_t first_sequence = 0;
    std::uint64_t last_sequence = 0;
    bool acknowledged = false;
};

struct PollResult {
    std::size_t batches = 0;
    std::size_t records = 0;
    std::size_t rejected = 0;
    std::size_t throttled_reads = 0;
    /// Records that expired between the checkpoint and the first readable one.
    std::size_t skipped_expired = 0;
};

struct RecoverReport {
    std::map<std::string, std::uint64_t> lost_by_shard;
    std::uint64_t lost = 0;
};

struct ShardLag {
    std::string shard_id;
    std::uint64_t lag = 0;
    double ingress_per_sec = 0;
    double capacity_per_sec = 0;
    /// Seconds to drain the lag at current rates; infinity if it never drains.
    double catch_up_seconds = 0;
    /// Until the oldest unread record expires.
    VTime time_to_expiry{0};
    bool flagged = false;
};

struct LagReport {
    std::vector<ShardLag> shards;
    std::uint64_t total_lag = 0;
    bool any_flagged = false;
};

/// Reads every shard from its checkpoint, stages each batch in the hot store,
/// folds it into the summary table, and only then advances the checkpoint.
class Consumer {
  public:
    explicit Consumer(std::string stream_id, ConsumerConfig config = {});

    PollResult poll_cycle(ShardedStream& stream, HotStore& hot, SummaryTable& summary, VTime now);

    /// Resumes from a stored checkpoint. Positions that have since expired are
    /// reported as lost; reading picks up at the oldest record still held.
    RecoverReport recover(const Checkpoint& stored, ShardedStream& stream, VTime now);

    /// Lag against the stream head and whether it will outlive retention,
    /// given per-shard ingress from `metrics`. A stalled consumer has no
    /// consumption capacity.
    LagReport keep_up_check(ShardedStream& stream, const MetricsWindow& metrics, VTime now,
                            bool stalled = false) const;

    const Checkpoint& checkpoint() const noexcept { return checkpoint_; }

    using AckObserver = std::function<void(const AckEntry&)>;
    void set_ack_observer(AckObserver observer) { ack_observer_ = std::move(observer); }

    std::uint64_t records_delivered() const noexcept { return records_delivered_; }
    std::uint64_t batches_delivered() const noexcept { return batches_delivered_; }
    std::uint64_t stage_rejections() const noexcept { return stage_rejections_; }

  private:
    std::string stream_id_;
    ConsumerConfig config_;
    Checkpoint checkpoint_;
    AckObserver ack_observer_;
    std::uint64_t records_delivered_ = 0;
    std::uint64_t batches_delivered_ = 0;
    std::uint64_t stage_rejections_ = 0;
};

} // namespace smmon
