#include "smmon/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <sstream>
#include <unordered_map>

namespace fs = std::filesystem;

namespace smmon {

namespace {

const char* const kStreamId = "stream";
const char* const kSourceId = "src";

/// Files a run owns inside its output directory.
const char* const kRunFiles[] = {"report.txt",       "loss_by_cause.csv", "loss_by_minute.csv", "shard_timeline.csv",
                                 "decisions.log",    "admit.log",         "summary.csv",        "summary_table.csv",
                                 "ledger.log",       "checkpoint",        "stream_state.txt"};

std::string fixed(double v, int digits = 6)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

void write_text(const fs::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error("cannot write " + path.string());
    out << text;
    if (!out)
        throw Error("write failed: " + path.string());
}

} // namespace

std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y)
{
    if (x.size() != y.size() || x.size() < 2)
        return std::nullopt;
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx <= 0 || syy <= 0)
        return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

double shard_hours(const std::vector<TimelinePoint>& timeline, VTime end)
{
    double ms_total = 0;
    for (std::size_t i = 0; i < timeline.size(); ++i) {
        const VTime from = timeline[i].time;
        if (from >= end)
            break;
        const VTime to = i + 1 < timeline.size() ? std::min(timeline[i + 1].time, end) : end;
        ms_total += static_cast<double>(timeline[i].open_shards) * static_cast<double>((to - from).count());
    }
    return ms_total / static_cast<double>(kHour.count());
}

// ---------------------------------------------------------------------------
// Simulation

Simulation::Simulation(Scenario scenario, fs::path out_dir)
    : scenario_(std::move(scenario))
    , out_dir_(std::move(out_dir))
    , faults_(scenario_.faults)
{
    validate(scenario_);
    scenario_.demand.seed = scenario_.seed;
    scenario_.producer.keywords = scenario_.demand.keywords;

    source_ = std::make_unique<SyntheticSource>(kSourceId, scenario_.demand, scenario_.source_limits);
    producer_ = std::make_unique<Producer>(kSourceId, scenario_.producer);

    StreamConfig sc;
    sc.stream_id = kStreamId;
    sc.limits = scenario_.shard_limits;
    sc.retention = scenario_.retention;
    sc.project = scenario_.project;
    sc.min_shards = scenario_.scaling.min_shards;
    sc.max_shards = scenario_.scaling.max_shards;
    stream_ = std::make_unique<ShardedStream>(sc, VTime{0});

    autoscaler_ = std::make_unique<Autoscaler>(scenario_.scaling);
    consumer_ = std::make_unique<Consumer>(kStreamId, scenario_.consumer);
    hot_ = std::make_unique<HotStore>(kStreamId, scenario_.storage.hot);
    summary_ = std::make_unique<SummaryTable>(scenario_.demand.keywords);
    cold_ = std::make_unique<ColdArchive>(out_dir_ / "archive");

    admit_log_.open(out_dir_ / "admit.log", std::ios::binary | std::ios::trunc);
    if (!admit_log_)
        throw Error("cannot write " + (out_dir_ / "admit.log").string());
    stream_->set_admit_observer([this](const AdmitEntry& e) {
        admit_log_ << format_admit_line(e) << '\n';
    });

    for (const auto& k : scenario_.demand.keywords) {
        if (!query_.empty())
            query_ += ' ';
        query_ += k;
    }
    timeline_.push_back({VTime{0}, stream_->open_shard_count()});
}

Simulation::~Simulation() = default;

void Simulation::mark(std::uint64_t id, Fate f)
{
    if (id >= fates_.size())
        fates_.resize(std::max<std::size_t>(id + 1, fates_.size() * 2), Fate::none);
    fates_[id] = std::max<std::uint8_t>(fates_[id], f);
}

void Simulation::mark(const PublishOutcome& out)
{
    for (auto id : out.admitted)
        mark(id, Fate::admitted);
    for (auto id : out.throttled)
        mark(id, Fate::throttled);
    for (auto id : out.lost)
        mark(id, Fate::producer_lost);
}

void Simulation::apply_faults(VTime t)
{
    stream_->set_available(!faults_.active(FaultKind::stream_outage, t));
    hot_->set_available(!faults_.active(FaultKind::hot_store_outage, t));
    cold_->set_available(!faults_.active(FaultKind::cold_store_outage, t));
    // The connection state at tick t covers records created in [t-1s, t).
    producer_->set_connected(!faults_.active(FaultKind::source_disconnect, t), t - kSecond);
}

void Simulation::step()
{
    if (finished_)
        throw std::logic_error("simulation already finished");
    now_ += kSecond;
    tick(now_, true);
}

void Simulation::run_until(VTime t)
{
    while (now_ < t && !done())
        step();
}

void Simulation::tick(VTime t, bool generate)
{
    apply_faults(t);

    std::vector<Record> delivered;
    if (generate) {
        auto generated = source_->generate(t - kSecond, t);
        if (!producer_->state().connected) {
            for (const auto& r : generated)
                mark(r.record_id, Fate::missed);
        } else {
            auto d = source_->stream_deliver(std::move(generated), scenario_.source_limits);
            for (auto id : d.dropped)
                mark(id, Fate::source_cap);
            delivered = std::move(d.delivered);
        }
    }

    if (producer_->state().connected) {
        for (const auto& gap : producer_->detect_gap()) {
            const auto repair = producer_->repair_gap(*stream_, *source_, gap, query_,
                                                      scenario_.backfill_max_results, t);
            mark(repair.publish);
        }
    }
    mark(producer_->publish_step(*stream_, std::move(delivered), t));

    if (t % kMinute == VTime{0})
        stream_->expire(t);

    if (generate && t % scenario_.scaling.metric_window == VTime{0}) {
        const auto metrics = stream_->collect_metrics(scenario_.scaling.metric_window, t);
        autoscaler_->step(*stream_, metrics, t);
        const int open = stream_->open_shard_count();
        if (open != timeline_.back().open_shards)
            timeline_.push_back({t, open});
        if (!first_keep_up_flag_) {
            const bool stalled = consumer_down_ || faults_.active(FaultKind::consumer_stall, t);
            if (consumer_->keep_up_check(*stream_, metrics, t, stalled).any_flagged)
                first_keep_up_flag_ = t;
        }
    }

    run_consumer(t);

    if (t % scenario_.storage.sweep_interval == VTime{0} && hot_->available() && cold_->available()) {
        duplicates_dropped_ += archive_sweep(*hot_, *cold_, t).duplicates_dropped;
        hot_->purge(t);
    }
}

void Simulation::run_consumer(VTime t)
{
    if (faults_.active(FaultKind::consumer_stall, t)) {
        // The replacement instance is built from the hot-store checkpoint
        // once the stall ends; until then nothing reads.
        consumer_down_ = true;
        return;
    }
    if (consumer_down_) {
        // The checkpoint lives in the hot store; wait for it.
        if (!hot_->available())
            return;
        Checkpoint stored{kStreamId, {}, VTime{0}};
        if (const auto text = hot_->checkpoint())
            stored = parse_checkpoint(*text);
        consumer_ = std::make_unique<Consumer>(kStreamId, scenario_.consumer);
        recovery_lost_ += consumer_->recover(stored, *stream_, t).lost;
        consumer_down_ = false;
    }
    consumer_->poll_cycle(*stream_, *hot_, *summary_, t);
}

std::uint64_t Simulation::consumer_lag() const
{
    std::uint64_t lag = 0;
    const auto& pos = consumer_->checkpoint().positions;
    for (const auto& s : stream_->shards()) {
        auto it = pos.find(s.shard_id);
        const std::uint64_t next = std::max<std::uint64_t>(it == pos.end() ? 0 : it->second + 1, s.first_sequence);
        if (s.next_sequence > next)
            lag += s.next_sequence - next;
    }
    return lag;
}

ScenarioReport Simulation::finish()
{
    if (finished_)
        throw std::logic_error("simulation already finished");
    while (!done())
        step();

    const VTime cap = scenario_.duration + scenario_.retention.duration + kHour;
    while (now_ < cap && (producer_->pending() > 0 || consumer_down_ || consumer_lag() > 0 ||
                          !producer_->detect_gap().empty())) {
        now_ += kSecond;
        tick(now_, false);
    }
    for (auto id : producer_->abandon_pending())
        mark(id, Fate::producer_lost);

    hot_->set_available(true);
    cold_->set_available(true);
    stream_->set_available(true);
    const auto final_sweep = archive_sweep(*hot_, *cold_, now_, true);
    if (!final_sweep.ok)
        throw InvariantViolation("final archive sweep failed");
    duplicates_dropped_ += final_sweep.duplicates_dropped;
    admit_log_.flush();
    finished_ = true;

    ScenarioReport rep;
    rep.name = scenario_.name;
    rep.seed = scenario_.seed;
    rep.duration = scenario_.duration;
    rep.finished_at = now_;

    const auto& ledger = source_->ledger();
    rep.generated = ledger.generated_count();
    rep.delivered = ledger.delivered_count();
    if (fates_.size() < rep.generated)
        fates_.resize(rep.generated, Fate::none);

    std::map<std::int64_t, MinuteLoss> minutes;
    for (std::uint64_t id = 0; id < rep.generated; ++id) {
        const auto& entry = ledger.entry(id);
        auto& m = minutes[entry.created_at_ms / kMinute.count()];
        m.minute = entry.created_at_ms / kMinute.count();
        ++m.generated;
        const auto fate = fates_[id];
        if (fate == Fate::admitted)
            ++rep.admitted;
        if (cold_->contains_record(id)) {
            ++rep.archived;
            continue;
        }
        ++m.lost;
        switch (fate) {
        case Fate::source_cap:
            ++rep.loss.source_cap;
            ++m.source_cap;
            break;
        case Fate::missed:
            ++rep.loss.unrecoverable;
            break;
        case Fate::producer_lost:
            ++rep.loss.producer_lost;
            break;
        case Fate::throttled:
            ++rep.loss.throttled;
            break;
        case Fate::admitted:
            ++rep.loss.expired_unread;
            break;
        default:
            throw InvariantViolation("record " + std::to_string(id) + " has no recorded fate");
        }
    }
    if (rep.archived != cold_->record_count())
        throw InvariantViolation("archive holds records the source never generated");
    if (rep.generated != rep.archived + rep.loss.total())
        throw InvariantViolation("conservation does not hold");

    std::vector<double> gx, ly;
    for (const auto& [minute, m] : minutes) {
        rep.per_minute.push_back(m);
        if (m.generated > 0) {
            gx.push_back(static_cast<double>(m.generated));
            ly.push_back(static_cast<double>(m.lost));
        }
    }
    rep.loss_demand_correlation = pearson(gx, ly);

    rep.duplicates_dropped = duplicates_dropped_;
    rep.summary_records = summary_->total_records();
    rep.shard_timeline = timeline_;
    rep.decisions_log = autoscaler_->state().decisions_log;
    rep.outages = producer_->state().outage_log;
    rep.recovery_lost = recovery_lost_;
    rep.first_keep_up_flag = first_keep_up_flag_;

    rep.usage.shard_hours = shard_hours(timeline_, scenario_.duration);
    rep.usage.ingest_gib = static_cast<double>(stream_->bytes_put()) / kGiB;
    rep.usage.delivery_gib = static_cast<double>(stream_->bytes_read()) / kGiB;
    rep.usage.storage_gib = static_cast<double>(stream_->bytes_put()) / kGiB;
    rep.pricing_mode = scenario_.pricing.mode;
    rep.cost_unit_hour = estimate_cost(rep.usage, scenario_.pricing, PricingMode::per_unit_hour);
    rep.cost_volume = estimate_cost(rep.usage, scenario_.pricing, PricingMode::per_volume);
    rep.cost_estimate = rep.pricing_mode == PricingMode::per_unit_hour ? rep.cost_unit_hour : rep.cost_volume;
    return rep;
}

// ---------------------------------------------------------------------------
// Output

void prepare_output_dir(const fs::path& dir)
{
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir))
        throw Error("cannot create output directory " + dir.string());
    const auto probe = dir / ".write-probe";
    {
        std::ofstream out(probe, std::ios::trunc);
        if (!out || !(out << "probe"))
            throw Error("output directory is not writable: " + dir.string());
    }
    fs::remove(probe, ec);
    for (const char* f : kRunFiles)
        fs::remove(dir / f, ec);
    fs::remove_all(dir / "archive", ec);
}

void write_report_text(const ScenarioReport& r, std::ostream& out)
{
    int peak = 0;
    for (const auto& p : r.shard_timeline)
        peak = std::max(peak, p.open_shards);
    std::map<std::string, int> decisions;
    int refused = 0;
    for (const auto& d : r.decisions_log) {
        ++decisions[to_string(d.decision)];
        refused += d.outcome == Outcome::refused ? 1 : 0;
    }

    out << "scenario               " << r.name << '\n';
    out << "seed                   " << r.seed << '\n';
    out << "duration               " << format_duration(r.duration) << '\n';
    out << "finished_at_ms         " << r.finished_at.count() << '\n';
    out << '\n';
    out << "generated              " << r.generated << '\n';
    out << "delivered              " << r.delivered << '\n';
    out << "admitted               " << r.admitted << '\n';
    out << "archived               " << r.archived << '\n';
    out << "duplicates_dropped     " << r.duplicates_dropped << '\n';
    out << "summary_records        " << r.summary_records << '\n';
    out << '\n';
    out << "loss_by_cause\n";
    out << "  source_cap           " << r.loss.source_cap << '\n';
    out << "  producer_lost        " << r.loss.producer_lost << '\n';
    out << "  throttled            " << r.loss.throttled << '\n';
    out << "  expired_unread       " << r.loss.expired_unread << '\n';
    out << "  unrecoverable        " << r.loss.unrecoverable << '\n';
    out << "  total                " << r.loss.total() << '\n';
    out << "conservation           generated = archived + total loss: "
        << (r.generated == r.archived + r.loss.total() ? "holds" : "VIOLATED") << '\n';
    out << '\n';
    out << "loss_demand_correlation "
        << (r.loss_demand_correlation ? fixed(*r.loss_demand_correlation) : std::string("undefined")) << '\n';
    out << "  Pearson r of per-minute (generated, lost) counts over minutes with\n"
           "  generation; a chosen measure of loss that depends on demand.\n"
           "  Undefined when either series is constant.\n";
    out << '\n';
    out << "shards initial/peak/final " << (r.shard_timeline.empty() ? 0 : r.shard_timeline.front().open_shards)
        << '/' << peak << '/' << (r.shard_timeline.empty() ? 0 : r.shard_timeline.back().open_shards) << '\n';
    out << "shard_hours            " << fixed(r.usage.shard_hours) << '\n';
    out << "decisions             ";
    for (const auto& [name, n] : decisions)
        out << ' ' << name << '=' << n;
    out << " refused=" << refused << '\n';
    out << '\n';
    out << "source outages         " << r.outages.size() << '\n';
    for (const auto& o : r.outages)
        out << "  [" << o.window.start.count() << ", " << o.window.end.count() << ") " << to_string(o.status)
            << '\n';
    out << "consumer recovery_lost " << r.recovery_lost << '\n';
    out << "keep_up_flag_at_ms     " << (r.first_keep_up_flag ? std::to_string(r.first_keep_up_flag->count()) : "-")
        << '\n';
    out << '\n';
    out << "ingest_gib             " << fixed(r.usage.ingest_gib, 9) << '\n';
    out << "delivery_gib           " << fixed(r.usage.delivery_gib, 9) << '\n';
    out << "storage_gib            " << fixed(r.usage.storage_gib, 9) << '\n';
    out << "cost per_unit_hour     " << fixed(r.cost_unit_hour) << '\n';
    out << "cost per_volume        " << fixed(r.cost_volume) << '\n';
    out << "cost_estimate          " << fixed(r.cost_estimate) << " (" << to_string(r.pricing_mode) << ")\n";
}

void emit_report(const ScenarioReport& r, Simulation& sim, const fs::path& dir)
{
    {
        std::ostringstream out;
        write_report_text(r, out);
        write_text(dir / "report.txt", out.str());
    }
    {
        std::ostringstream out;
        out << "cause,count\n"
            << "source_cap," << r.loss.source_cap << '\n'
            << "producer_lost," << r.loss.producer_lost << '\n'
            << "throttled," << r.loss.throttled << '\n'
            << "expired_unread," << r.loss.expired_unread << '\n'
            << "unrecoverable," << r.loss.unrecoverable << '\n';
        write_text(dir / "loss_by_cause.csv", out.str());
    }
    {
        std::ostringstream out;
        out << "minute,generated,lost,source_cap\n";
        for (const auto& m : r.per_minute)
            out << m.minute << ',' << m.generated << ',' << m.lost << ',' << m.source_cap << '\n';
        write_text(dir / "loss_by_minute.csv", out.str());
    }
    {
        std::ostringstream out;
        out << "time_ms,open_shards\n";
        for (const auto& p : r.shard_timeline)
            out << p.time.count() << ',' << p.open_shards << '\n';
        write_text(dir / "shard_timeline.csv", out.str());
    }
    {
        std::ostringstream out;
        for (const auto& e : r.decisions_log)
            out << format_decision_line(e) << '\n';
        write_text(dir / "decisions.log", out.str());
    }
    {
        std::ostringstream out;
        out << "key,value\n"
            << "generated," << r.generated << '\n'
            << "delivered," << r.delivered << '\n'
            << "admitted," << r.admitted << '\n'
            << "archived," << r.archived << '\n'
            << "duplicates_dropped," << r.duplicates_dropped << '\n'
            << "summary_records," << r.summary_records << '\n'
            << "loss_total," << r.loss.total() << '\n'
            << "loss_demand_correlation,"
            << (r.loss_demand_correlation ? fixed(*r.loss_demand_correlation) : std::string("undefined")) << '\n'
            << "shard_hours," << fixed(r.usage.shard_hours) << '\n'
            << "cost_per_unit_hour," << fixed(r.cost_unit_hour) << '\n'
            << "cost_per_volume," << fixed(r.cost_volume) << '\n'
            << "finished_at_ms," << r.finished_at.count() << '\n';
        write_text(dir / "summary.csv", out.str());
    }
    {
        std::ostringstream out;
        sim.summary().write_csv(out);
        write_text(dir / "summary_table.csv", out.str());
    }
    {
        std::ofstream out(dir / "ledger.log", std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error("cannot write ledger.log");
        sim.source().ledger().write(out);
    }
    write_text(dir / "checkpoint", sim.hot().checkpoint().value_or(""));
    {
        std::ostringstream out;
        sim.stream().write_snapshot(out);
        write_text(dir / "stream_state.txt", out.str());
    }
}

ScenarioReport run_scenario(const Scenario& scenario, const fs::path& out_dir)
{
    validate(scenario);
    prepare_output_dir(out_dir);
    const auto started = std::chrono::steady_clock::now();
    Simulation sim(scenario, out_dir);
    auto report = sim.finish();
    emit_report(report, sim, out_dir);
    report.wall_time_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

// ---------------------------------------------------------------------------
// Re-checking a run directory

std::pair<std::uint64_t, std::uint64_t> scan_archive(const fs::path& root)
{
    IdSet ids;
    std::unordered_map<std::string, IdSet> keys;
    std::uint64_t dup_keys = 0;
    if (!fs::exists(root))
        return {0, 0};
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file())
            files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::string line;
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        while (std::getline(in, line)) {
            if (line.empty())
                continue;
            const auto t1 = line.find('\t');
            const auto t2 = line.find('\t', t1 + 1);
            const auto t3 = line.find('\t', t2 + 1);
            if (t1 == std::string::npos || t2 == std::string::npos || t3 == std::string::npos)
                throw Error("malformed archive line in " + f.string());
            ids.insert(std::stoull(line.substr(0, t1)));
            if (!keys[line.substr(t1 + 1, t2 - t1 - 1)].insert(std::stoull(line.substr(t2 + 1, t3 - t2 - 1))))
                ++dup_keys;
        }
    }
    return {ids.size(), dup_keys};
}

namespace {

std::map<std::string, std::string> read_csv_pairs(const fs::path& path)
{
    std::ifstream in(path);
    if (!in)
        throw Error("cannot read " + path.string());
    std::map<std::string, std::string> out;
    std::string line;
    std::getline(in, line); // header
    while (std::getline(in, line)) {
        const auto comma = line.find(',');
        if (comma != std::string::npos)
            out[line.substr(0, comma)] = line.substr(comma + 1);
    }
    return out;
}

} // namespace

RunCheck check_run_dir(const fs::path& dir)
{
    RunCheck c;
    const auto summary = read_csv_pairs(dir / "summary.csv");
    const auto loss = read_csv_pairs(dir / "loss_by_cause.csv");
    auto get = [](const std::map<std::string, std::string>& m, const std::string& k) -> std::uint64_t {
        auto it = m.find(k);
        if (it == m.end())
            throw Error("missing field '" + k + "'");
        return std::stoull(it->second);
    };
    c.generated = get(summary, "generated");
    c.loss.source_cap = get(loss, "source_cap");
    c.loss.producer_lost = get(loss, "producer_lost");
    c.loss.throttled = get(loss, "throttled");
    c.loss.expired_unread = get(loss, "expired_unread");
    c.loss.unrecoverable = get(loss, "unrecoverable");
    std::tie(c.archived_on_disk, c.duplicate_keys_on_disk) = scan_archive(dir / "archive");
    c.conserved = c.generated == c.archived_on_disk + c.loss.total() && c.duplicate_keys_on_disk == 0 &&
                  c.archived_on_disk == get(summary, "archived");
    return c;
}

} // namespace smmon
