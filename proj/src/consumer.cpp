#include "smmon/consumer.hpp"

#include <algorithm>
#include <charconv>
#include <limits>
#include <stdexcept>

namespace smmon {

std::string format_checkpoint(const Checkpoint& c)
{
    std::string out = "checkpoint\t" + c.stream_id + "\t" + std::to_string(c.committed_at.count()) + "\n";
    for (const auto& [shard, seq] : c.positions)
        out += shard + "\t" + std::to_string(seq) + "\n";
    return out;
}

namespace {

template <typename T>
T parse_int(std::string_view text)
{
    T v{};
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || end != text.data() + text.size())
        throw std::invalid_argument("checkpoint: bad number '" + std::string(text) + "'");
    return v;
}

} // namespace

Checkpoint parse_checkpoint(std::string_view text)
{
    Checkpoint c;
    bool header = false;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        auto line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (line.empty())
            continue;
        const auto t1 = line.find('\t');
        if (t1 == std::string_view::npos)
            throw std::invalid_argument("checkpoint: missing tab");
        if (!header) {
            const auto t2 = line.find('\t', t1 + 1);
            if (line.substr(0, t1) != "checkpoint" || t2 == std::string_view::npos)
                throw std::invalid_argument("checkpoint: bad header");
            c.stream_id = std::string(line.substr(t1 + 1, t2 - t1 - 1));
            c.committed_at = VTime{parse_int<std::int64_t>(line.substr(t2 + 1))};
            header = true;
            continue;
        }
        auto shard = std::string(line.substr(0, t1));
        if (!c.positions.emplace(shard, parse_int<std::uint64_t>(line.substr(t1 + 1))).second)
            throw std::invalid_argument("checkpoint: shard listed twice: " + shard);
    }
    if (!header)
        throw std::invalid_argument("checkpoint: empty");
    return c;
}

Consumer::Consumer(std::string stream_id, ConsumerConfig config)
    : stream_id_(std::move(stream_id))
    , config_(config)
{
    checkpoint_.stream_id = stream_id_;
}

PollResult Consumer::poll_cycle(ShardedStream& stream, HotStore& hot, SummaryTable& summary, VTime now)
{
    PollResult result;
    const auto retired = stream.retired_shards();
    for (auto it = checkpoint_.positions.begin(); it != checkpoint_.positions.end();)
        it = retired.count(it->first) ? checkpoint_.positions.erase(it) : std::next(it);

    const auto requests = std::max<std::uint64_t>(1, stream.config().limits.read_requests_per_sec);
    bool storage_down = false;
    for (const auto& info : stream.shards()) {
        if (storage_down)
            break;
        for (std::uint64_t req = 0; req < requests; ++req) {
            auto pos = checkpoint_.positions.find(info.shard_id);
            ShardIterator iter{info.shard_id, pos == checkpoint_.positions.end() ? 0 : pos->second + 1};
            auto read = stream.get_records(iter, config_.max_records_per_request, now);
            if (read.status == ReadStatus::throttled) {
                ++result.throttled_reads;
                break;
            }
            if (read.records.empty())
                break;
            result.skipped_expired += read.records.front()->sequence - iter.next_sequence;

            Batch batch{info.shard_id, std::move(read.records)};
            const auto first = batch.records.front()->sequence;
            const auto last = batch.records.back()->sequence;
            const auto key = hot.stage(batch, now);
            if (ack_observer_)
                ack_observer_({now, info.shard_id, first, last, key.has_value()});
            if (!key) {
                ++result.rejected;
                ++stage_rejections_;
                storage_down = true;
                break;
            }
            summary.summarize(*hot.get(*key));
            checkpoint_.positions[info.shard_id] = last;
            checkpoint_.committed_at = now;
            hot.put_checkpoint(format_checkpoint(checkpoint_));
            ++result.batches;
            result.records += batch.records.size();
        }
    }
    records_delivered_ += result.records;
    batches_delivered_ += result.batches;
    return result;
}

RecoverReport Consumer::recover(const Checkpoint& stored, ShardedStream& stream, VTime now)
{
    if (!stored.stream_id.empty() && stored.stream_id != stream_id_)
        throw std::invalid_argument("recover: checkpoint belongs to stream '" + stored.stream_id + "'");
    stream.expire(now);

    RecoverReport report;
    std::map<std::string, std::uint64_t> earliest;
    for (const auto& info : stream.shards())
        earliest[info.shard_id] = info.first_sequence;
    for (const auto& [shard, next] : stream.retired_shards())
        earliest[shard] = next;

    for (const auto& [shard, first_available] : earliest) {
        auto pos = stored.positions.find(shard);
        const std::uint64_t resume = pos == stored.positions.end() ? 0 : pos->second + 1;
        if (first_available > resume) {
            report.lost_by_shard[shard] = first_available - resume;
            report.lost += first_available - resume;
        }
    }

    // Never move a position backwards, even if the stored copy is stale.
    Checkpoint merged = stored;
    merged.stream_id = stream_id_;
    for (const auto& [shard, seq] : checkpoint_.positions) {
        auto& p = merged.positions[shard];
        p = std::max(p, seq);
    }
    checkpoint_ = std::move(merged);
    return report;
}

LagReport Consumer::keep_up_check(ShardedStream& stream, const MetricsWindow& metrics, VTime now, bool stalled) const
{
    LagReport report;
    const auto& limits = stream.config().limits;
    const auto retention = stream.config().retention.duration;
    for (const auto& info : stream.shards()) {
        ShardLag lag;
        lag.shard_id = info.shard_id;
        auto pos = checkpoint_.positions.find(info.shard_id);
        const std::uint64_t next_unread = std::max<std::uint64_t>(
            pos == checkpoint_.positions.end() ? 0 : pos->second + 1, info.first_sequence);
        lag.lag = info.next_sequence > next_unread ? info.next_sequence - next_unread : 0;

        double avg_size = 1;
        if (auto m = metrics.per_shard.find(info.shard_id); m != metrics.per_shard.end()) {
            lag.ingress_per_sec = m->second.records_per_sec;
            if (m->second.records_per_sec > 0)
                avg_size = std::max(1.0, m->second.bytes_per_sec / m->second.records_per_sec);
        }
        if (!stalled)
            lag.capacity_per_sec =
                std::min(static_cast<double>(limits.read_requests_per_sec * config_.max_records_per_request),
                         static_cast<double>(limits.read_bytes_per_sec) / avg_size);

        if (lag.lag > 0) {
            const double drain = lag.capacity_per_sec - lag.ingress_per_sec;
            lag.catch_up_seconds = drain > 0 ? static_cast<double>(lag.lag) / drain
                                             : std::numeric_limits<double>::infinity();
            if (auto oldest = stream.scan(info.shard_id, next_unread, next_unread, now))
                lag.time_to_expiry = oldest->front()->put_at + retention - now;
            lag.flagged = lag.catch_up_seconds * 1000.0 >= static_cast<double>(lag.time_to_expiry.count());
        }
        report.total_lag += lag.lag;
        report.any_flagged = report.any_flagged || lag.flagged;
        report.shards.push_back(std::move(lag));
    }
    return report;
}

} // namespace smmon
