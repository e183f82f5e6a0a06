#include "smmon/scenario.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace smmon {

namespace {

constexpr FaultKind kAllFaults[] = {FaultKind::source_disconnect, FaultKind::stream_outage,
                                    FaultKind::consumer_stall, FaultKind::hot_store_outage,
                                    FaultKind::cold_store_outage};

} // namespace

std::string to_string(FaultKind k)
{
    switch (k) {
    case FaultKind::source_disconnect:
        return "source_disconnect";
    case FaultKind::stream_outage:
        return "stream_outage";
    case FaultKind::consumer_stall:
        return "consumer_stall";
    case FaultKind::hot_store_outage:
        return "hot_store_outage";
    case FaultKind::cold_store_outage:
        return "cold_store_outage";
    }
    return "?";
}

FaultKind parse_fault_kind(const std::string& text)
{
    for (auto k : kAllFaults)
        if (to_string(k) == text)
            return k;
    throw ConfigError("unknown fault kind '" + text + "'");
}

FaultSchedule::FaultSchedule(const std::vector<FaultSpec>& faults)
{
    for (const auto& f : faults)
        windows_[static_cast<int>(f.kind)].push_back(f.window);
    for (auto& w : windows_)
        w = merge_intervals(std::move(w));
}

bool FaultSchedule::active(FaultKind kind, VTime t) const
{
    const auto& w = windows_[static_cast<int>(kind)];
    auto it = std::upper_bound(w.begin(), w.end(), t, [](VTime v, const Interval& i) { return v < i.start; });
    return it != w.begin() && std::prev(it)->contains(t);
}

const std::vector<Interval>& FaultSchedule::windows(FaultKind kind) const
{
    return windows_[static_cast<int>(kind)];
}

VTime FaultSchedule::last_end() const
{
    VTime end{0};
    for (const auto& w : windows_)
        if (!w.empty())
            end = std::max(end, w.back().end);
    return end;
}

std::string to_string(PricingMode m) { return m == PricingMode::per_unit_hour ? "per_unit_hour" : "per_volume"; }

PricingMode parse_pricing_mode(const std::string& text)
{
    if (text == "per_unit_hour")
        return PricingMode::per_unit_hour;
    if (text == "per_volume")
        return PricingMode::per_volume;
    throw ConfigError("unknown pricing mode '" + text + "'");
}

double estimate_cost(const Usage& usage, const PricingModel& pricing, PricingMode mode)
{
    if (mode == PricingMode::per_unit_hour)
        return pricing.unit_hour_rate * usage.shard_hours;
    return pricing.ingest_rate * usage.ingest_gib + pricing.delivery_rate * usage.delivery_gib +
           pricing.storage_rate * usage.storage_gib;
}

// ---------------------------------------------------------------------------
// YAML

namespace {

void check_keys(const YAML::Node& node, const std::string& where, std::initializer_list<const char*> allowed)
{
    if (!node.IsMap())
        throw ConfigError(where + ": expected a mapping");
    for (const auto& kv : node) {
        const auto key = kv.first.as<std::string>();
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            throw ConfigError(where + ": unknown key '" + key + "'");
    }
}

template <typename T>
void read(const YAML::Node& node, const char* key, T& out, const std::string& where)
{
    if (!node[key])
        return;
    try {
        out = node[key].as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError(where + "." + key + ": wrong type");
    }
}

void read_duration(const YAML::Node& node, const char* key, VTime& out, const std::string& where)
{
    if (!node[key])
        return;
    if (!node[key].IsScalar())
        throw ConfigError(where + "." + key + ": expected a duration");
    out = parse_duration(node[key].as<std::string>());
}

void read_limits(const YAML::Node& n, ShardLimits& l)
{
    check_keys(n, "shard_limits",
               {"write_bytes_per_sec", "write_records_per_sec", "read_bytes_per_sec", "read_requests_per_sec"});
    read(n, "write_bytes_per_sec", l.write_bytes_per_sec, "shard_limits");
    read(n, "write_records_per_sec", l.write_records_per_sec, "shard_limits");
    read(n, "read_bytes_per_sec", l.read_bytes_per_sec, "shard_limits");
    read(n, "read_requests_per_sec", l.read_requests_per_sec, "shard_limits");
}

void read_demand(const YAML::Node& n, DemandProfile& d, const std::string& base_dir)
{
    check_keys(n, "demand",
               {"kind", "base_rate", "amplitude", "period", "bursts", "trace_path", "mean_payload_bytes",
                "payload_jitter", "keywords"});
    if (n["kind"])
        d.kind = parse_profile_kind(n["kind"].as<std::string>());
    read(n, "base_rate", d.base_rate, "demand");
    read(n, "amplitude", d.amplitude, "demand");
    read_duration(n, "period", d.period, "demand");
    read(n, "mean_payload_bytes", d.mean_payload_bytes, "demand");
    read(n, "payload_jitter", d.payload_jitter, "demand");
    read(n, "keywords", d.keywords, "demand");
    if (const auto bursts = n["bursts"]) {
        if (!bursts.IsSequence())
            throw ConfigError("demand.bursts: expected a list");
        for (const auto& b : bursts) {
            check_keys(b, "demand.bursts[]", {"start", "duration", "rate"});
            Burst burst;
            read_duration(b, "start", burst.start, "demand.bursts[]");
            read_duration(b, "duration", burst.duration, "demand.bursts[]");
            read(b, "rate", burst.rate, "demand.bursts[]");
            d.bursts.push_back(burst);
        }
    }
    if (n["trace_path"]) {
        d.trace_path = n["trace_path"].as<std::string>();
        std::filesystem::path p(d.trace_path);
        if (p.is_relative())
            p = std::filesystem::path(base_dir) / p;
        d.trace = load_trace(p.string());
    }
}

} // namespace

Scenario parse_scenario(const std::string& text, const std::string& base_dir)
{
    YAML::Node root;
    try {
        root = YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("scenario is not valid YAML: ") + e.what());
    }
    if (!root || root.IsNull())
        throw ConfigError("scenario is empty");
    check_keys(root, "scenario",
               {"name", "seed", "duration", "demand", "source", "shard_limits", "project", "retention", "scaling",
                "storage", "producer", "consumer", "faults", "pricing"});

    Scenario s;
    read(root, "name", s.name, "scenario");
    read(root, "seed", s.seed, "scenario");
    read_duration(root, "duration", s.duration, "scenario");

    if (const auto n = root["demand"])
        read_demand(n, s.demand, base_dir);
    if (const auto n = root["source"]) {
        check_keys(n, "source", {"delivery_records_per_sec", "unlimited", "backfill_max_results"});
        read(n, "delivery_records_per_sec", s.source_limits.delivery_records_per_sec, "source");
        read(n, "unlimited", s.source_limits.unlimited, "source");
        read(n, "backfill_max_results", s.backfill_max_results, "source");
    }
    if (const auto n = root["shard_limits"])
        read_limits(n, s.shard_limits);
    if (const auto n = root["project"]) {
        check_keys(n, "project", {"region_class"});
        if (n["region_class"])
            s.project = ProjectLimits::for_region(parse_region_class(n["region_class"].as<std::string>()));
    }
    if (const auto n = root["retention"]) {
        check_keys(n, "retention", {"duration"});
        read_duration(n, "duration", s.retention.duration, "retention");
    }
    if (const auto n = root["scaling"]) {
        check_keys(n, "scaling",
                   {"up_bytes_per_sec", "up_records_per_sec", "down_bytes_per_sec", "down_records_per_sec",
                    "down_delay", "metric_window", "min_shards", "max_shards"});
        read(n, "up_bytes_per_sec", s.scaling.up_bytes_per_sec, "scaling");
        read(n, "up_records_per_sec", s.scaling.up_records_per_sec, "scaling");
        read(n, "down_bytes_per_sec", s.scaling.down_bytes_per_sec, "scaling");
        read(n, "down_records_per_sec", s.scaling.down_records_per_sec, "scaling");
        read_duration(n, "down_delay", s.scaling.down_delay, "scaling");
        read_duration(n, "metric_window", s.scaling.metric_window, "scaling");
        read(n, "min_shards", s.scaling.min_shards, "scaling");
        read(n, "max_shards", s.scaling.max_shards, "scaling");
    }
    if (const auto n = root["storage"]) {
        check_keys(n, "storage", {"hot_age", "hot_retention", "sweep_interval"});
        read_duration(n, "hot_age", s.storage.hot.archive_age, "storage");
        read_duration(n, "hot_retention", s.storage.hot.retention, "storage");
        read_duration(n, "sweep_interval", s.storage.sweep_interval, "storage");
    }
    if (const auto n = root["producer"]) {
        check_keys(n, "producer", {"queue_capacity", "retry_budget"});
        read(n, "queue_capacity", s.producer.queue_capacity, "producer");
        read(n, "retry_budget", s.producer.retry_budget, "producer");
    }
    if (const auto n = root["consumer"]) {
        check_keys(n, "consumer", {"max_records_per_request"});
        read(n, "max_records_per_request", s.consumer.max_records_per_request, "consumer");
    }
    if (const auto n = root["faults"]) {
        if (!n.IsSequence())
            throw ConfigError("faults: expected a list");
        for (const auto& f : n) {
            check_keys(f, "faults[]", {"kind", "start", "end"});
            if (!f["kind"] || !f["start"] || !f["end"])
                throw ConfigError("faults[]: kind, start and end are required");
            FaultSpec spec{parse_fault_kind(f["kind"].as<std::string>()), {}};
            read_duration(f, "start", spec.window.start, "faults[]");
            read_duration(f, "end", spec.window.end, "faults[]");
            s.faults.push_back(spec);
        }
    }
    if (const auto n = root["pricing"]) {
        check_keys(n, "pricing", {"mode", "unit_hour_rate", "ingest_rate", "delivery_rate", "storage_rate"});
        if (n["mode"])
            s.pricing.mode = parse_pricing_mode(n["mode"].as<std::string>());
        read(n, "unit_hour_rate", s.pricing.unit_hour_rate, "pricing");
        read(n, "ingest_rate", s.pricing.ingest_rate, "pricing");
        read(n, "delivery_rate", s.pricing.delivery_rate, "pricing");
        read(n, "storage_rate", s.pricing.storage_rate, "pricing");
    }
    s.producer.keywords = s.demand.keywords;
    validate(s);
    return s;
}

Scenario load_scenario(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read scenario file '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    const auto dir = std::filesystem::path(path).parent_path();
    auto s = parse_scenario(text.str(), dir.empty() ? "." : dir.string());
    if (s.name == "scenario")
        s.name = std::filesystem::path(path).stem().string();
    return s;
}

void validate(const Scenario& s)
{
    if (s.duration <= VTime{0})
        throw ConfigError("duration must be positive");
    if (s.duration % kSecond != VTime{0})
        throw ConfigError("duration must be a whole number of seconds");
    validate(s.demand);
    if (s.demand.kind == DemandProfile::Kind::trace && s.demand.trace.empty())
        throw ConfigError("trace demand needs a non-empty trace_path");
    validate(s.source_limits);
    validate(s.shard_limits);
    validate(s.project);
    validate(s.retention);
    validate(s.scaling, s.shard_limits);
    if (s.storage.hot.archive_age < VTime{0} || s.storage.hot.retention < s.storage.hot.archive_age)
        throw ConfigError("storage: need 0 <= hot_age <= hot_retention");
    if (s.storage.sweep_interval <= VTime{0} || s.storage.sweep_interval % kSecond != VTime{0})
        throw ConfigError("storage.sweep_interval must be a positive whole number of seconds");
    if (s.producer.queue_capacity == 0)
        throw ConfigError("producer.queue_capacity must be positive");
    if (s.producer.retry_budget < 1)
        throw ConfigError("producer.retry_budget must be at least 1");
    if (s.consumer.max_records_per_request == 0)
        throw ConfigError("consumer.max_records_per_request must be positive");
    for (const auto& f : s.faults) {
        if (f.window.start >= f.window.end)
            throw ConfigError(to_string(f.kind) + ": fault window must have start < end");
        if (f.window.start < VTime{0} || f.window.end > s.duration)
            throw ConfigError(to_string(f.kind) + ": fault window must lie within [0, duration]");
    }
    const auto& p = s.pricing;
    if (p.unit_hour_rate < 0 || p.ingest_rate < 0 || p.delivery_rate < 0 || p.storage_rate < 0)
        throw ConfigError("pricing rates must be non-negative");
}

} // namespace smmon
