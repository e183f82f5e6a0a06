#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "smmon/model.hpp"
#include "smmon/stream.hpp"

namespace smmon {

enum class Decision { ScaleUp, ScheduleDown, ExecuteDown, CancelDown, Hold };

std::string to_string(Decision d);
Decision parse_decision(const std::string& text);

/// What happened to the stream once a decision was applied.
enum class Outcome { none, applied, refused };

std::string to_string(Outcome o);

struct DecisionEntry {
    VTime time{0};
    Decision decision = Decision::Hold;
    int shard_count = 0; ///< open shards after the decision was applied
    double avg_records_per_sec = 0;
    double avg_bytes_per_sec = 0;
    Outcome outcome = Outcome::none;
    std::string detail;
};

/// "time_ms,decision,shard_count,avg_rec_s,avg_bytes_s,outcome"
std::string format_decision_line(const DecisionEntry& e);
DecisionEntry parse_decision_line(const std::string& line);

struct ScaleState {
    /// When every per-shard average first dropped below its lower bound.
    std::optional<VTime> pending_down_since;
    std::vector<DecisionEntry> decisions_log;
};

/// One controller step over a completed metric window.
///
/// Scale-up fires when the per-open-shard average strictly exceeds either
/// upper bound. Scale-down needs both averages strictly below their lower
/// bounds for `down_delay`; a window at or above either lower bound cancels
/// the pending timer. Appends the decision to the log.
Decision evaluate(const MetricsWindow& metrics, const ScalingPolicy& policy, ScaleState& state, VTime now);

/// Carries out `decision`: ScaleUp splits the busiest open shard, ExecuteDown
/// merges the adjacent open pair with the lowest combined record rate.
/// Refusals are recorded in the last log entry and leave the stream as is.
Outcome apply(Decision decision, const MetricsWindow& metrics, ShardedStream& stream, ScaleState& state,
              VTime now);

class Autoscaler {
  public:
    explicit Autoscaler(ScalingPolicy policy);

    /// Collects the window ending at `now`, evaluates, and applies.
    Decision step(ShardedStream& stream, VTime now);

    /// Evaluates and applies an already collected window.
    Decision step(ShardedStream& stream, const MetricsWindow& metrics, VTime now);

    const ScaleState& state() const noexcept { return state_; }
    const ScalingPolicy& policy() const noexcept { return policy_; }

    void write_log(std::ostream& out) const;

  private:
    ScalingPolicy policy_;
    ScaleState state_;
};

} // namespace smmon
