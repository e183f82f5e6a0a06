#include "smmon/autoscaler.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace smmon {

std::string to_string(Decision d)
{
    switch (d) {
    case Decision::ScaleUp:
        return "ScaleUp";
    case Decision::ScheduleDown:
        return "ScheduleDown";
    case Decision::ExecuteDown:
        return "ExecuteDown";
    case Decision::CancelDown:
        return "CancelDown";
    case Decision::Hold:
        return "Hold";
    }
    return "?";
}

Decision parse_decision(const std::string& text)
{
    for (auto d : {Decision::ScaleUp, Decision::ScheduleDown, Decision::ExecuteDown, Decision::CancelDown,
                   Decision::Hold})
        if (to_string(d) == text)
            return d;
    throw std::invalid_argument("unknown decision '" + text + "'");
}

std::string to_string(Outcome o)
{
    switch (o) {
    case Outcome::none:
        return "none";
    case Outcome::applied:
        return "applied";
    case Outcome::refused:
        return "refused";
    }
    return "?";
}

std::string format_decision_line(const DecisionEntry& e)
{
    char buf[160];
    std::snprintf(buf, sizeof buf, "%lld,%s,%d,%.6f,%.6f,%s", static_cast<long long>(e.time.count()),
                  to_string(e.decision).c_str(), e.shard_count, e.avg_records_per_sec, e.avg_bytes_per_sec,
                  to_string(e.outcome).c_str());
    return buf;
}

DecisionEntry parse_decision_line(const std::string& line)
{
    std::istringstream in(line);
    std::string t, d, n, r, b, o;
    if (!std::getline(in, t, ',') || !std::getline(in, d, ',') || !std::getline(in, n, ',') ||
        !std::getline(in, r, ',') || !std::getline(in, b, ',') || !std::getline(in, o))
        throw std::invalid_argument("malformed decision line '" + line + "'");
    DecisionEntry e;
    e.time = VTime{std::stoll(t)};
    e.decision = parse_decision(d);
    e.shard_count = std::stoi(n);
    e.avg_records_per_sec = std::stod(r);
    e.avg_bytes_per_sec = std::stod(b);
    if (o == "applied")
        e.outcome = Outcome::applied;
    else if (o == "refused")
        e.outcome = Outcome::refused;
    else if (o == "none")
        e.outcome = Outcome::none;
    else
        throw std::invalid_argument("unknown outcome '" + o + "'");
    return e;
}

Decision evaluate(const MetricsWindow& metrics, const ScalingPolicy& policy, ScaleState& state, VTime now)
{
    if (metrics.window != policy.metric_window)
        throw std::invalid_argument("evaluate: metrics window does not match the policy window");

    const double recs = metrics.avg_per_open_shard.records_per_sec;
    const double bytes = metrics.avg_per_open_shard.bytes_per_sec;
    const bool above = recs > static_cast<double>(policy.up_records_per_sec) ||
                       bytes > static_cast<double>(policy.up_bytes_per_sec);
    const bool below = recs < static_cast<double>(policy.down_records_per_sec) &&
                       bytes < static_cast<double>(policy.down_bytes_per_sec);

    Decision d = Decision::Hold;
    if (above) {
        state.pending_down_since.reset();
        d = Decision::ScaleUp;
    } else if (below) {
        if (!state.pending_down_since) {
            state.pending_down_since = now;
            d = Decision::ScheduleDown;
        } else if (now - *state.pending_down_since >= policy.down_delay) {
            // One shard per trigger; the next removal needs a fresh timer.
            state.pending_down_since.reset();
            d = Decision::ExecuteDown;
        }
    } else if (state.pending_down_since) {
        state.pending_down_since.reset();
        d = Decision::CancelDown;
    }

    state.decisions_log.push_back({now, d, metrics.open_shards, recs, bytes, Outcome::none, {}});
    return d;
}

namespace {

std::string busiest_shard(const MetricsWindow& metrics)
{
    std::string best;
    double best_rate = -1;
    for (const auto& [id, usage] : metrics.per_shard) {
        // Ties resolve to the lexicographically first id; map order guarantees it.
        if (usage.records_per_sec > best_rate) {
            best = id;
            best_rate = usage.records_per_sec;
        }
    }
    return best;
}

std::optional<std::pair<std::string, std::string>> coldest_adjacent_pair(const MetricsWindow& metrics,
                                                                         const ShardedStream& stream)
{
    std::vector<ShardInfo> open;
    for (const auto& s : stream.shards())
        if (s.state == ShardState::open)
            open.push_back(s);
    std::sort(open.begin(), open.end(), [](const ShardInfo& a, const ShardInfo& b) { return a.range.low < b.range.low; });

    auto rate = [&](const std::string& id) {
        auto it = metrics.per_shard.find(id);
        return it == metrics.per_shard.end() ? 0.0 : it->second.records_per_sec;
    };
    std::optional<std::pair<std::string, std::string>> best;
    double best_rate = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i + 1 < open.size(); ++i) {
        const double combined = rate(open[i].shard_id) + rate(open[i + 1].shard_id);
        if (combined < best_rate) {
            best_rate = combined;
            best = std::make_pair(open[i].shard_id, open[i + 1].shard_id);
        }
    }
    return best;
}

} // namespace

Outcome apply(Decision decision, const MetricsWindow& metrics, ShardedStream& stream, ScaleState& state, VTime now)
{
    Outcome outcome = Outcome::none;
    std::string detail;
    try {
        if (decision == Decision::ScaleUp) {
            const auto target = busiest_shard(metrics);
            if (target.empty())
                throw ScaleRefused("no open shard to split");
            const auto [a, b] = stream.split_shard(target, now);
            detail = "split " + target + " -> " + a + "," + b;
            outcome = Outcome::applied;
        } else if (decision == Decision::ExecuteDown) {
            const auto pair = coldest_adjacent_pair(metrics, stream);
            if (!pair)
                throw ScaleRefused("no adjacent open pair to merge");
            const auto child = stream.merge_shards(pair->first, pair->second, now);
            detail = "merge " + pair->first + "," + pair->second + " -> " + child;
            outcome = Outcome::applied;
        }
    } catch (const ScaleRefused& e) {
        outcome = Outcome::refused;
        detail = e.what();
    }
    if (!state.decisions_log.empty() && state.decisions_log.back().time == now) {
        auto& last = state.decisions_log.back();
        last.outcome = outcome;
        last.detail = detail;
        last.shard_count = stream.open_shard_count();
    }
    return outcome;
}

Autoscaler::Autoscaler(ScalingPolicy policy)
    : policy_(policy)
{
}

Decision Autoscaler::step(ShardedStream& stream, VTime now)
{
    return step(stream, stream.collect_metrics(policy_.metric_window, now), now);
}

Decision Autoscaler::step(ShardedStream& stream, const MetricsWindow& metrics, VTime now)
{
    const auto d = evaluate(metrics, policy_, state_, now);
    apply(d, metrics, stream, state_, now);
    return d;
}

void Autoscaler::write_log(std::ostream& out) const
{
    for (const auto& e : state_.decisions_log)
        out << format_decision_line(e) << '\n';
}

} // namespace smmon
