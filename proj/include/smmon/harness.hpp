#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "smmon/autoscaler.hpp"
#include "smmon/consumer.hpp"
#include "smmon/producer.hpp"
#include "smmon/scenario.hpp"
#include "smmon/source.hpp"
#include "smmon/storage.hpp"
#include "smmon/stream.hpp"

namespace smmon {

struct LossByCause {
    std::uint64_t source_cap = 0;
    std::uint64_t producer_lost = 0;
    std::uint64_t throttled = 0;
    std::uint64_t expired_unread = 0;
    std::uint64_t unrecoverable = 0;

    std::uint64_t total() const noexcept
    {
        return source_cap + producer_lost + throttled + expired_unread + unrecoverable;
    }
    friend bool operator==(const LossByCause&, const LossByCause&) = default;
};

struct TimelinePoint {
    VTime time{0};
    int open_shards = 0;
    friend bool operator==(const TimelinePoint&, const TimelinePoint&) = default;
};

struct MinuteLoss {
    std::int64_t minute = 0;
    std::uint64_t generated = 0;
    std::uint64_t lost = 0;
    std::uint64_t source_cap = 0;
};

struct ScenarioReport {
    std::string name;
    std::uint64_t seed = 0;
    VTime duration{0};
    /// Last simulated tick, including the drain after `duration`.
    VTime finished_at{0};

    std::uint64_t generated = 0;
    std::uint64_t delivered = 0;
    std::uint64_t admitted = 0;
    std::uint64_t archived = 0; ///< unique record ids in the archive
    std::uint64_t duplicates_dropped = 0;
    std::uint64_t summary_records = 0;
    LossByCause loss;

    /// Pearson r over minutes with generation > 0 of (generated, lost);
    /// empty when either series is constant.
    std::optional<double> loss_demand_correlation;
    std::vector<MinuteLoss> per_minute;

    std::vector<TimelinePoint> shard_timeline;
    std::vector<DecisionEntry> decisions_log;
    std::vector<OutageWindow> outages;
    std::uint64_t recovery_lost = 0;
    std::optional<VTime> first_keep_up_flag;

    Usage usage;
    PricingMode pricing_mode = PricingMode::per_unit_hour;
    double cost_estimate = 0;
    double cost_unit_hour = 0;
    double cost_volume = 0;

    double wall_time_seconds = 0;
};

/// Pearson correlation; empty for fewer than two points or zero variance.
std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y);

/// Σ open shards × hours over [0, end], from a step timeline.
double shard_hours(const std::vector<TimelinePoint>& timeline, VTime end);

/// Every component of one scenario on a shared simulated clock.
///
/// Each 1 s tick T runs, in order: fault updates, source generation for
/// created_at in [T-1s, T), producer publish (with gap repair after a
/// reconnect), stream expiry (each minute), autoscaler (each metric window),
/// consumer poll, archive sweep (each sweep interval).
class Simulation {
  public:
    /// Writes the archive tree and admit.log under `out_dir`, which must
    /// already be prepared (see prepare_output_dir).
    Simulation(Scenario scenario, std::filesystem::path out_dir);
    ~Simulation();

    Simulation(const Simulation&) = delete;
    Simulation& operator=(const Simulation&) = delete;

    /// Advances one tick.
    void step();

    /// Steps until now() >= t or the scenario duration is reached.
    void run_until(VTime t);

    /// Runs the rest of the scenario, drains, does a final sweep and classifies
    /// every generated record. Call once.
    ScenarioReport finish();

    VTime now() const noexcept { return now_; }
    bool done() const noexcept { return now_ >= scenario_.duration; }

    const Scenario& scenario() const noexcept { return scenario_; }
    SyntheticSource& source() { return *source_; }
    Producer& producer() { return *producer_; }
    ShardedStream& stream() { return *stream_; }
    Autoscaler& autoscaler() { return *autoscaler_; }
    Consumer& consumer() { return *consumer_; }
    HotStore& hot() { return *hot_; }
    SummaryTable& summary() { return *summary_; }
    ColdArchive& cold() { return *cold_; }
    const std::filesystem::path& out_dir() const noexcept { return out_dir_; }

  private:
    enum Fate : std::uint8_t { none = 0, source_cap = 1, missed = 2, producer_lost = 3, throttled = 4, admitted = 5 };

    void tick(VTime t, bool generate);
    void apply_faults(VTime t);
    void mark(std::uint64_t id, Fate f);
    void mark(const PublishOutcome& out);
    void run_consumer(VTime t);
    std::uint64_t consumer_lag() const;

    Scenario scenario_;
    std::filesystem::path out_dir_;
    FaultSchedule faults_;
    std::unique_ptr<SyntheticSource> source_;
    std::unique_ptr<Producer> producer_;
    std::unique_ptr<ShardedStream> stream_;
    std::unique_ptr<Autoscaler> autoscaler_;
    std::unique_ptr<Consumer> consumer_;
    std::unique_ptr<HotStore> hot_;
    std::unique_ptr<SummaryTable> summary_;
    std::unique_ptr<ColdArchive> cold_;
    std::ofstream admit_log_;
    std::string query_;

    VTime now_{0};
    std::vector<std::uint8_t> fates_;
    std::vector<TimelinePoint> timeline_;
    bool consumer_down_ = false;
    std::uint64_t recovery_lost_ = 0;
    std::uint64_t duplicates_dropped_ = 0;
    std::optional<VTime> first_keep_up_flag_;
    bool finished_ = false;
};

/// Creates `dir` if needed and checks it is writable, then clears the files of
/// any previous run. Throws Error before touching anything if not writable.
void prepare_output_dir(const std::filesystem::path& dir);

/// Runs a whole scenario into `out_dir` and writes the report files.
ScenarioReport run_scenario(const Scenario& scenario, const std::filesystem::path& out_dir);

/// report.txt, loss_by_cause.csv, loss_by_minute.csv, shard_timeline.csv,
/// decisions.log, summary.csv, plus the component dumps of `sim`.
void emit_report(const ScenarioReport& report, Simulation& sim, const std::filesystem::path& out_dir);

void write_report_text(const ScenarioReport& report, std::ostream& out);

/// Result of re-checking a finished run directory from its files alone.
struct RunCheck {
    std::uint64_t generated = 0;
    std::uint64_t archived_on_disk = 0; ///< unique record ids found in segments
    std::uint64_t duplicate_keys_on_disk = 0;
    LossByCause loss;
    bool conserved = false;
};

/// Counts unique record ids and duplicate (shard_id, sequence) pairs across
/// every segment under `archive_root`.
std::pair<std::uint64_t, std::uint64_t> scan_archive(const std::filesystem::path& archive_root);

RunCheck check_run_dir(const std::filesystem::path& dir);

} // namespace smmon
