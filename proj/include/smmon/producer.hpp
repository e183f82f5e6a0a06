#pragma once

#include <cstdint>
#include <deque>
#include <string>
#include <string_view>
#include <vector>

#include "smmon/model.hpp"
#include "smmon/source.hpp"
#include "smmon/stream.hpp"

namespace smmon {

enum class GapStatus { pending, repaired, partially_repaired, permanently_incomplete };

std::string to_string(GapStatus s);

struct OutageWindow {
    Interval window;
    GapStatus status = GapStatus::pending;
};

struct ProducerConfig {
    /// Local buffer used while the stream refuses or throttles puts.
    std::size_t queue_capacity = 10000;
    /// Put attempts per record before it is given up as throttled.
    int retry_budget = 3;
    std::vector<std::string> keywords{"vote", "election", "ballot"};
};

struct ProducerState {
    std::string source_id;
    bool connected = true;
    VTime last_published_created_at{0};
    /// Disjoint, ordered.
    std::vector<OutageWindow> outage_log;

    std::uint64_t publish_attempts = 0;
    std::uint64_t publish_successes = 0;
    std::uint64_t publish_throttled = 0;
    std::uint64_t producer_lost = 0;
    /// Records handed over by the live feed.
    std::uint64_t received = 0;
    /// Records obtained through gap repair.
    std::uint64_t recovered = 0;
};

/// Record ids by fate for one call.
struct PublishOutcome {
    std::vector<std::uint64_t> admitted;
    std::vector<std::uint64_t> throttled;
    std::vector<std::uint64_t> lost;
};

struct RepairOutcome {
    std::size_t recovered = 0;
    GapStatus status = GapStatus::pending;
    PublishOutcome publish;
};

/// Publishes a source's records to the stream one at a time, in order.
///
/// Records that cannot be put right away (stream outage, throttle) wait in a
/// bounded FIFO and block everything behind them, which keeps the put order
/// equal to the created_at order. A throttled record is retried on later
/// steps until its retry budget is spent. When the FIFO is full, the newest
/// records are dropped.
class Producer {
  public:
    explicit Producer(std::string source_id, ProducerConfig config = {});

    /// Pending records first, then `batch`, each submitted individually.
    PublishOutcome publish_step(ShardedStream& stream, std::vector<Record> batch, VTime now);

    /// Marks the source connection down or up. Going back up logs the outage.
    void set_connected(bool connected, VTime now);

    /// Adds an interruption to the outage log, merging overlaps.
    void record_outage(Interval window);

    /// Outage windows not yet repaired.
    std::vector<Interval> detect_gap() const;

    /// Backfills `window` from the source and publishes what comes back with
    /// put time `now`. The window must be one returned by detect_gap.
    RepairOutcome repair_gap(ShardedStream& stream, Source& source, Interval window, std::string_view query,
                             std::size_t max_results, VTime now);

    /// Empties the local buffer, counting everything in it as lost.
    std::vector<std::uint64_t> abandon_pending();

    std::string partition_key_for(const Record& r) const;

    std::size_t pending() const noexcept { return queue_.size(); }
    const ProducerState& state() const noexcept { return state_; }
    const ProducerConfig& config() const noexcept { return config_; }

  private:
    struct Pending {
        Record record;
        int attempts = 0;
    };
    enum class Attempt { accepted, retry, dropped };

    Attempt attempt(ShardedStream& stream, Pending& item, VTime now, PublishOutcome& out);
    bool drain(ShardedStream& stream, VTime now, PublishOutcome& out);
    void submit(ShardedStream& stream, std::vector<Record> records, VTime now, PublishOutcome& out);

    ProducerConfig config_;
    ProducerState state_;
    std::deque<Pending> queue_;
    VTime disconnected_since_{0};
};

} // namespace smmon
