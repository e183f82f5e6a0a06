#include "smmon/source.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>

#include "smmon/hash.hpp"

namespace smmon {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double seconds(VTime t) { return static_cast<double>(t.count()) / 1000.0; }

// Integral of max(0, base + amp*sin(wt)) over [0, t].
double sinusoid_cumulative(double base, double amp, double period_s, double t)
{
    const double w = kTwoPi / period_s;
    const double raw = base * t + (amp / w) * (1.0 - std::cos(w * t));
    if (amp <= base)
        return raw;

    // Subtract the negative lobes, which sit at phase (pi + a, 2pi - a).
    const double alpha = std::asin(base / amp);
    const double lo = std::numbers::pi + alpha;
    const double hi = kTwoPi - alpha;
    auto lobe = [&](double from, double to) {
        return (base * (to - from) - amp * (std::cos(to) - std::cos(from))) / w;
    };
    const double phase = w * t;
    const double full = std::floor(phase / kTwoPi);
    const double rem = phase - full * kTwoPi;
    double negative = full * lobe(lo, hi);
    if (rem > lo)
        negative += lobe(lo, std::min(rem, hi));
    return raw - negative;
}

// Cumulative demand with trace prefix sums precomputed.
class DemandIntegrator {
  public:
    explicit DemandIntegrator(const DemandProfile& p)
        : profile_(p)
    {
        if (p.kind == DemandProfile::Kind::trace) {
            prefix_.reserve(p.trace.size());
            double acc = 0;
            for (std::size_t i = 0; i < p.trace.size(); ++i) {
                prefix_.push_back(acc);
                if (i + 1 < p.trace.size())
                    acc += p.trace[i].rate * seconds(p.trace[i + 1].at - p.trace[i].at);
            }
        }
    }

    double cumulative(VTime t) const
    {
        if (t <= VTime{0})
            return 0;
        const auto& p = profile_;
        switch (p.kind) {
        case DemandProfile::Kind::constant:
            return p.base_rate * seconds(t);
        case DemandProfile::Kind::sinusoidal:
            return sinusoid_cumulative(p.base_rate, p.amplitude, seconds(p.period), seconds(t));
        case DemandProfile::Kind::burst: {
            double total = p.base_rate * seconds(t);
            for (const auto& b : p.bursts) {
                const auto end = std::min(t, b.start + b.duration);
                if (end > b.start)
                    total += b.rate * seconds(end - b.start);
            }
            return total;
        }
        case DemandProfile::Kind::trace: {
            auto it = std::upper_bound(p.trace.begin(), p.trace.end(), t,
                                       [](VTime v, const TracePoint& tp) { return v < tp.at; });
            if (it == p.trace.begin())
                return 0;
            const auto i = static_cast<std::size_t>(std::distance(p.trace.begin(), it) - 1);
            return prefix_[i] + p.trace[i].rate * seconds(t - p.trace[i].at);
        }
        }
        return 0;
    }

  private:
    const DemandProfile& profile_;
    std::vector<double> prefix_;
};

// Whole records emitted in [0, t); robust to accumulated rounding.
std::uint64_t whole_records(double cumulative)
{
    return static_cast<std::uint64_t>(std::floor(cumulative + 1e-7));
}

std::vector<std::string_view> split_words(std::string_view text)
{
    std::vector<std::string_view> words;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
            ++i;
        const std::size_t start = i;
        while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i])))
            ++i;
        if (i > start)
            words.push_back(text.substr(start, i - start));
    }
    return words;
}

} // namespace

// ---------------------------------------------------------------------------
// DemandProfile

double DemandProfile::rate_at(VTime t) const
{
    switch (kind) {
    case Kind::constant:
        return base_rate;
    case Kind::sinusoidal:
        return std::max(0.0, base_rate + amplitude * std::sin(kTwoPi * seconds(t) / seconds(period)));
    case Kind::burst: {
        double r = base_rate;
        for (const auto& b : bursts)
            if (t >= b.start && t < b.start + b.duration)
                r += b.rate;
        return r;
    }
    case Kind::trace: {
        double r = 0;
        for (const auto& tp : trace) {
            if (tp.at > t)
                break;
            r = tp.rate;
        }
        return r;
    }
    }
    return 0;
}

double DemandProfile::cumulative(VTime t) const { return DemandIntegrator(*this).cumulative(t); }

DemandProfile::Kind parse_profile_kind(const std::string& text)
{
    if (text == "constant")
        return DemandProfile::Kind::constant;
    if (text == "sinusoidal")
        return DemandProfile::Kind::sinusoidal;
    if (text == "burst")
        return DemandProfile::Kind::burst;
    if (text == "trace")
        return DemandProfile::Kind::trace;
    throw ConfigError("unknown demand kind '" + text + "'");
}

std::string to_string(DemandProfile::Kind kind)
{
    switch (kind) {
    case DemandProfile::Kind::constant:
        return "constant";
    case DemandProfile::Kind::sinusoidal:
        return "sinusoidal";
    case DemandProfile::Kind::burst:
        return "burst";
    case DemandProfile::Kind::trace:
        return "trace";
    }
    return "?";
}

std::vector<TracePoint> load_trace(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot read trace file '" + path + "'");
    std::vector<TracePoint> points;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#')
            continue;
        const auto comma = line.find(',');
        std::int64_t at = 0;
        double count = 0;
        bool ok = comma != std::string::npos;
        if (ok) {
            auto r1 = std::from_chars(line.data(), line.data() + comma, at);
            auto r2 = std::from_chars(line.data() + comma + 1, line.data() + line.size(), count);
            ok = r1.ec == std::errc{} && r2.ec == std::errc{};
        }
        if (!ok || at < 0 || count < 0)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 'timestamp_ms,count'");
        if (!points.empty() && VTime{at} <= points.back().at)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": timestamps must increase");
        points.push_back({VTime{at}, count});
    }
    return points;
}

void validate(const DemandProfile& p)
{
    if (p.base_rate < 0 || p.amplitude < 0)
        throw ConfigError("demand rates must be non-negative");
    if (p.kind == DemandProfile::Kind::sinusoidal && p.period <= VTime{0})
        throw ConfigError("sinusoidal period must be positive");
    for (const auto& b : p.bursts)
        if (b.rate < 0 || b.duration < VTime{0} || b.start < VTime{0})
            throw ConfigError("burst entries need non-negative start, duration and rate");
    for (const auto& tp : p.trace)
        if (tp.rate < 0)
            throw ConfigError("trace counts must be non-negative");
    if (p.payload_jitter < 0 || p.payload_jitter > 1)
        throw ConfigError("payload_jitter must be within [0, 1]");
    if (p.mean_payload_bytes == 0 || p.mean_payload_bytes > kMaxRecordBytes)
        throw ConfigError("mean_payload_bytes must be within (0, 1 MiB]");
    for (const auto& k : p.keywords)
        if (k.empty() || k.find_first_of(" \t\n") != std::string::npos)
            throw ConfigError("keywords must be single non-empty words");
}

std::optional<std::string_view> keyword_tag(std::string_view payload,
                                            const std::vector<std::string>& keywords)
{
    for (auto word : split_words(payload))
        for (const auto& k : keywords)
            if (word == k)
                return word;
    return std::nullopt;
}

std::size_t relevance(std::string_view payload, std::string_view query)
{
    const auto terms = split_words(query);
    std::size_t hits = 0;
    for (auto word : split_words(payload))
        if (std::find(terms.begin(), terms.end(), word) != terms.end())
            ++hits;
    return hits;
}

// ---------------------------------------------------------------------------
// SourceLedger

std::uint64_t SourceLedger::append(VTime created_at, std::uint64_t size_bytes)
{
    if (!entries_.empty() && created_at.count() < entries_.back().created_at_ms)
        throw InvariantViolation("ledger entries must be appended in created_at order");
    entries_.push_back({created_at.count(), static_cast<std::uint32_t>(size_bytes), SourceStatus::generated});
    return id_base_ + entries_.size() - 1;
}

void SourceLedger::mark_delivered(std::uint64_t id)
{
    auto& e = entries_.at(id - id_base_);
    if (e.status != SourceStatus::generated)
        throw InvariantViolation("record " + std::to_string(id) + " already classified at the source");
    e.status = SourceStatus::delivered;
    ++delivered_;
}

void SourceLedger::mark_dropped(std::uint64_t id)
{
    auto& e = entries_.at(id - id_base_);
    if (e.status != SourceStatus::generated)
        throw InvariantViolation("record " + std::to_string(id) + " already classified at the source");
    e.status = SourceStatus::dropped;
    ++dropped_;
}

std::pair<std::uint64_t, std::uint64_t> SourceLedger::id_range(VTime from, VTime to) const
{
    auto by_time = [](const Entry& e, std::int64_t t) { return e.created_at_ms < t; };
    auto lo = std::lower_bound(entries_.begin(), entries_.end(), from.count(), by_time);
    auto hi = std::lower_bound(lo, entries_.end(), to.count(), by_time);
    return {id_base_ + static_cast<std::uint64_t>(lo - entries_.begin()),
            id_base_ + static_cast<std::uint64_t>(hi - entries_.begin())};
}

void SourceLedger::write(std::ostream& out) const
{
    static constexpr const char* names[] = {"generated", "delivered", "dropped"};
    std::uint64_t id = id_base_;
    for (const auto& e : entries_) {
        out << id++ << ',' << e.created_at_ms << ',' << e.size_bytes << ','
            << names[static_cast<int>(e.status)] << '\n';
    }
}

// ---------------------------------------------------------------------------
// SyntheticSource

SyntheticSource::SyntheticSource(std::string source_id, DemandProfile profile, SourceLimits limits,
                                 std::uint64_t id_base)
    : source_id_(std::move(source_id))
    , profile_(std::move(profile))
    , limits_(limits)
    , ledger_(id_base)
{
    validate(profile_);
    validate(limits_);
    vocabulary_ = profile_.keywords;
    static constexpr const char* filler[] = {
        "the",   "a",     "is",    "to",     "and",   "of",     "in",    "on",    "for",   "it",
        "today", "news",  "just",  "people", "now",   "new",    "time",  "day",   "what",  "we",
        "this",  "that",  "with",  "about",  "more",  "state",  "city",  "live",  "watch", "read",
        "local", "story", "video", "update", "thread", "photo", "right", "week",  "see",   "via"};
    vocabulary_.insert(vocabulary_.end(), std::begin(filler), std::end(filler));
}

std::string SyntheticSource::payload_for(std::uint64_t record_id) const
{
    std::minstd_rand rng(static_cast<std::uint_fast32_t>(mix64(profile_.seed ^ mix64(record_id)) % 2147483646u + 1));
    const double u = static_cast<double>(rng() - rng.min()) / static_cast<double>(rng.max() - rng.min()) * 2.0 - 1.0;
    const double target = static_cast<double>(profile_.mean_payload_bytes) * (1.0 + profile_.payload_jitter * u);
    const auto length = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(target)));

    std::string payload;
    payload.reserve(length + 16);
    while (payload.size() < length) {
        if (!payload.empty())
            payload.push_back(' ');
        payload += vocabulary_[rng() % vocabulary_.size()];
    }
    payload.resize(length);
    return payload;
}

std::vector<Record> SyntheticSource::generate(VTime from, VTime to)
{
    if (from >= to)
        throw std::invalid_argument("generate: empty interval");
    const DemandIntegrator integ(profile_);
    const auto n = whole_records(integ.cumulative(to)) - whole_records(integ.cumulative(from));
    std::vector<Record> out;
    out.reserve(n);
    const auto span = (to - from).count();
    for (std::uint64_t k = 0; k < n; ++k) {
        Record r;
        r.created_at = from + VTime{static_cast<std::int64_t>(k) * span / static_cast<std::int64_t>(n)};
        r.source_id = source_id_;
        r.record_id = ledger_.next_id();
        r.payload = payload_for(r.record_id);
        ledger_.append(r.created_at, r.size_bytes());
        out.push_back(std::move(r));
    }
    return out;
}

Delivery SyntheticSource::stream_deliver(std::vector<Record> generated, const SourceLimits& limits)
{
    Delivery d;
    d.delivered.reserve(generated.size());
    for (auto& r : generated) {
        const std::int64_t second = r.created_at.count() / 1000;
        if (second != bucket_second_) {
            bucket_second_ = second;
            bucket_delivered_ = 0;
        }
        if (limits.unlimited || bucket_delivered_ < limits.delivery_records_per_sec) {
            ++bucket_delivered_;
            ledger_.mark_delivered(r.record_id);
            d.delivered.push_back(std::move(r));
        } else {
            ledger_.mark_dropped(r.record_id);
            d.dropped.push_back(r.record_id);
        }
    }
    return d;
}

Delivery SyntheticSource::deliver(VTime from, VTime to) { return stream_deliver(generate(from, to), limits_); }

std::vector<Record> SyntheticSource::backfill(std::string_view query, VTime from, VTime to,
                                              std::size_t max_results, VTime now)
{
    const VTime horizon = now - kBackfillHorizon;
    if (to <= horizon)
        throw WindowExpired("backfill window ends before the " + format_duration(kBackfillHorizon) +
                            " search horizon");
    from = std::max(from, horizon);
    to = std::min(to, now);
    if (from >= to || max_results == 0)
        return {};

    struct Hit {
        std::size_t score;
        std::int64_t created_at;
        std::uint64_t id;
    };
    std::vector<Hit> hits;
    const auto [lo, hi] = ledger_.id_range(from, to);
    for (auto id = lo; id < hi; ++id) {
        const auto score = relevance(payload_for(id), query);
        if (score > 0)
            hits.push_back({score, ledger_.entry(id).created_at_ms, id});
    }
    const auto keep = std::min(max_results, hits.size());
    std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(keep), hits.end(),
                      [](const Hit& a, const Hit& b) {
                          if (a.score != b.score)
                              return a.score > b.score;
                          if (a.created_at != b.created_at)
                              return a.created_at > b.created_at;
                          return a.id < b.id;
                      });
    std::vector<Record> out;
    out.reserve(keep);
    for (std::size_t i = 0; i < keep; ++i) {
        Record r;
        r.record_id = hits[i].id;
        r.source_id = source_id_;
        r.created_at = VTime{hits[i].created_at};
        r.payload = payload_for(hits[i].id);
        out.push_back(std::move(r));
    }
    return out;
}

} // namespace smmon
