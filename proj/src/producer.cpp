#include "smmon/producer.hpp"

#include <algorithm>
#include <stdexcept>

namespace smmon {

std::string to_string(GapStatus s)
{
    switch (s) {
    case GapStatus::pending:
        return "pending";
    case GapStatus::repaired:
        return "repaired";
    case GapStatus::partially_repaired:
        return "partially_repaired";
    case GapStatus::permanently_incomplete:
        return "permanently_incomplete";
    }
    return "?";
}

Producer::Producer(std::string source_id, ProducerConfig config)
    : config_(std::move(config))
{
    if (config_.retry_budget < 1)
        throw ConfigError("producer retry_budget must be at least 1");
    state_.source_id = std::move(source_id);
}

std::string Producer::partition_key_for(const Record& r) const
{
    std::string_view tag;
    if (auto k = keyword_tag(r.payload, config_.keywords))
        tag = *k;
    else
        tag = std::string_view(r.payload).substr(0, r.payload.find(' '));
    std::string key = state_.source_id;
    key += '/';
    key += tag;
    return key;
}

Producer::Attempt Producer::attempt(ShardedStream& stream, Pending& item, VTime now, PublishOutcome& out)
{
    ++state_.publish_attempts;
    const auto result = stream.put(item.record, now);
    switch (result.verdict) {
    case PutVerdict::accepted:
        ++state_.publish_successes;
        state_.last_published_created_at = std::max(state_.last_published_created_at, item.record.created_at);
        out.admitted.push_back(item.record.record_id);
        return Attempt::accepted;
    case PutVerdict::unavailable:
        return Attempt::retry;
    case PutVerdict::throttled:
    case PutVerdict::project_throttled:
        if (++item.attempts >= config_.retry_budget) {
            ++state_.publish_throttled;
            out.throttled.push_back(item.record.record_id);
            return Attempt::dropped;
        }
        return Attempt::retry;
    }
    return Attempt::retry;
}

bool Producer::drain(ShardedStream& stream, VTime now, PublishOutcome& out)
{
    while (!queue_.empty()) {
        if (attempt(stream, queue_.front(), now, out) == Attempt::retry)
            return false;
        queue_.pop_front();
    }
    return true;
}

void Producer::submit(ShardedStream& stream, std::vector<Record> records, VTime now, PublishOutcome& out)
{
    bool blocked = !drain(stream, now, out);
    for (auto& r : records) {
        r.partition_key = partition_key_for(r);
        if (!blocked) {
            Pending item{std::move(r), 0};
            const auto a = attempt(stream, item, now, out);
            if (a == Attempt::retry) {
                queue_.push_back(std::move(item));
                blocked = true;
            }
            continue;
        }
        if (queue_.size() < config_.queue_capacity) {
            queue_.push_back({std::move(r), 0});
        } else {
            ++state_.producer_lost;
            out.lost.push_back(r.record_id);
        }
    }
}

PublishOutcome Producer::publish_step(ShardedStream& stream, std::vector<Record> batch, VTime now)
{
    if (!state_.connected && !batch.empty())
        throw std::logic_error("publish_step: producer is disconnected from its source");
    PublishOutcome out;
    state_.received += batch.size();
    submit(stream, std::move(batch), now, out);
    return out;
}

void Producer::set_connected(bool connected, VTime now)
{
    if (connected == state_.connected)
        return;
    if (!connected) {
        disconnected_since_ = now;
    } else if (now > disconnected_since_) {
        record_outage({disconnected_since_, now});
    }
    state_.connected = connected;
}

void Producer::record_outage(Interval window)
{
    if (window.end <= window.start)
        throw std::invalid_argument("record_outage: empty window");
    OutageWindow merged{window, GapStatus::pending};
    std::vector<OutageWindow> kept;
    for (const auto& o : state_.outage_log) {
        if (o.window.end < merged.window.start || o.window.start > merged.window.end) {
            kept.push_back(o);
        } else {
            merged.window.start = std::min(merged.window.start, o.window.start);
            merged.window.end = std::max(merged.window.end, o.window.end);
        }
    }
    kept.push_back(merged);
    std::sort(kept.begin(), kept.end(),
              [](const OutageWindow& a, const OutageWindow& b) { return a.window.start < b.window.start; });
    state_.outage_log = std::move(kept);
}

std::vector<Interval> Producer::detect_gap() const
{
    std::vector<Interval> gaps;
    for (const auto& o : state_.outage_log)
        if (o.status == GapStatus::pending)
            gaps.push_back(o.window);
    return gaps;
}

RepairOutcome Producer::repair_gap(ShardedStream& stream, Source& source, Interval window, std::string_view query,
                                   std::size_t max_results, VTime now)
{
    auto it = std::find_if(state_.outage_log.begin(), state_.outage_log.end(),
                           [&](const OutageWindow& o) { return o.window == window; });
    if (it == state_.outage_log.end())
        throw std::invalid_argument("repair_gap: window is not in the outage log");

    RepairOutcome result;
    std::vector<Record> found;
    try {
        found = source.backfill(query, window.start, window.end, max_results, now);
    } catch (const WindowExpired&) {
        it->status = GapStatus::permanently_incomplete;
        result.status = it->status;
        return result;
    }
    result.recovered = found.size();
    it->status = (max_results > 0 && found.size() >= max_results) ? GapStatus::partially_repaired
                                                                   : GapStatus::repaired;
    result.status = it->status;

    // Oldest first so the repaired slice keeps its own chronology.
    std::sort(found.begin(), found.end(), [](const Record& a, const Record& b) {
        return a.created_at != b.created_at ? a.created_at < b.created_at : a.record_id < b.record_id;
    });
    state_.recovered += found.size();
    submit(stream, std::move(found), now, result.publish);
    return result;
}

std::vector<std::uint64_t> Producer::abandon_pending()
{
    std::vector<std::uint64_t> ids;
    ids.reserve(queue_.size());
    for (const auto& p : queue_)
        ids.push_back(p.record.record_id);
    state_.producer_lost += queue_.size();
    queue_.clear();
    return ids;
}

} // namespace smmon
