#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "smmon/model.hpp"
#include "smmon/time.hpp"

namespace smmon {

/// How far back the search endpoint reaches.
constexpr VTime kBackfillHorizon = 7 * kDay;

struct Burst {
    VTime start{0};
    VTime duration{0};
    double rate = 0; ///< records/s added on top of the base rate
};

/// One step of a trace profile: `rate` records/s from `at` until the next point.
struct TracePoint {
    VTime at{0};
    double rate = 0;
};

struct DemandProfile {
    enum class Kind { constant, sinusoidal, burst, trace };

    Kind kind = Kind::constant;
    double base_rate = 0;
    double amplitude = 0;
    VTime period = kHour;
    std::vector<Burst> bursts;
    std::string trace_path;
    std::vector<TracePoint> trace; ///< loaded from trace_path
    std::uint64_t seed = 1;
    std::uint64_t mean_payload_bytes = 64;
    double payload_jitter = 0.25;
    /// Topic keywords mixed into payload text.
    std::vector<std::string> keywords{"vote", "election", "ballot"};

    /// Instantaneous rate in records/s, clamped at zero.
    double rate_at(VTime t) const;

    /// Expected records emitted in [0, t).
    double cumulative(VTime t) const;

    double integral(VTime from, VTime to) const { return cumulative(to) - cumulative(from); }
};

DemandProfile::Kind parse_profile_kind(const std::string& text);
std::string to_string(DemandProfile::Kind kind);

/// Reads "timestamp_ms,count" lines. Blank lines and '#' comments are skipped.
/// Throws ConfigError if the file is unreadable or malformed.
std::vector<TracePoint> load_trace(const std::string& path);

/// Throws ConfigError for negative rates, non-positive periods, and so on.
void validate(const DemandProfile& profile);

/// First payload token that is one of `keywords`, if any.
std::optional<std::string_view> keyword_tag(std::string_view payload,
                                            const std::vector<std::string>& keywords);

/// Number of payload tokens equal to any whitespace-separated query term.
std::size_t relevance(std::string_view payload, std::string_view query);

enum class SourceStatus : std::uint8_t { generated, delivered, dropped };

/// Ground truth of everything a synthetic source produced.
class SourceLedger {
  public:
    struct Entry {
        std::int64_t created_at_ms;
        std::uint32_t size_bytes;
        SourceStatus status;
    };

    explicit SourceLedger(std::uint64_t id_base = 0)
        : id_base_(id_base)
    {
    }

    std::uint64_t append(VTime created_at, std::uint64_t size_bytes);
    void mark_delivered(std::uint64_t id);
    void mark_dropped(std::uint64_t id);

    bool contains(std::uint64_t id) const { return id >= id_base_ && id - id_base_ < entries_.size(); }
    const Entry& entry(std::uint64_t id) const { return entries_.at(id - id_base_); }
    std::uint64_t id_base() const noexcept { return id_base_; }
    std::uint64_t next_id() const noexcept { return id_base_ + entries_.size(); }

    std::size_t generated_count() const noexcept { return entries_.size(); }
    std::size_t delivered_count() const noexcept { return delivered_; }
    std::size_t dropped_count() const noexcept { return dropped_; }

    /// Ids whose created_at lies in [from, to). Entries are chronological.
    std::pair<std::uint64_t, std::uint64_t> id_range(VTime from, VTime to) const;

    /// "record_id,created_at_ms,size_bytes,status" per line.
    void write(std::ostream& out) const;

  private:
    std::uint64_t id_base_;
    std::vector<Entry> entries_;
    std::size_t delivered_ = 0;
    std::size_t dropped_ = 0;
};

/// Output of a rate-capped real-time delivery.
struct Delivery {
    std::vector<Record> delivered;
    std::vector<std::uint64_t> dropped;
};

/// Anything that can feed a producer: a rate-capped real-time feed plus a
/// windowed historical search used to repair gaps.
class Source {
  public:
    virtual ~Source() = default;

    virtual const std::string& id() const = 0;

    /// Records created in [from, to) that the platform hands over in real time.
    virtual Delivery deliver(VTime from, VTime to) = 0;

    /// Up to `max_results` records matching `query` created in [from, to),
    /// most relevant first. Throws WindowExpired beyond the search horizon.
    virtual std::vector<Record> backfill(std::string_view query, VTime from, VTime to,
                                         std::size_t max_results, VTime now) = 0;
};

/// Seeded stand-in for a social-media platform.
class SyntheticSource : public Source {
  public:
    SyntheticSource(std::string source_id, DemandProfile profile, SourceLimits limits,
                    std::uint64_t id_base = 0);

    const std::string& id() const override { return source_id_; }

    /// Records with created_at in [from, to); count follows the integrated
    /// demand, timestamps are spread evenly inside each call's interval.
    std::vector<Record> generate(VTime from, VTime to);

    /// Caps deliveries per one-second bucket of created_at, earliest first.
    /// `generated` must be sorted by created_at.
    Delivery stream_deliver(std::vector<Record> generated, const SourceLimits& limits);

    Delivery deliver(VTime from, VTime to) override;

    std::vector<Record> backfill(std::string_view query, VTime from, VTime to,
                                 std::size_t max_results, VTime now) override;

    /// Regenerates a record's payload from the seed alone.
    std::string payload_for(std::uint64_t record_id) const;

    const SourceLedger& ledger() const noexcept { return ledger_; }
    const DemandProfile& profile() const noexcept { return profile_; }
    const SourceLimits& limits() const noexcept { return limits_; }

  private:
    std::string source_id_;
    DemandProfile profile_;
    SourceLimits limits_;
    SourceLedger ledger_;
    std::vector<std::string> vocabulary_;
    std::int64_t bucket_second_ = -1;
    std::uint64_t bucket_delivered_ = 0;
};

} // namespace smmon
