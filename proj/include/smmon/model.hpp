#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>

#include "smmon/time.hpp"

namespace smmon {

// ---------------------------------------------------------------------------
// Errors

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Invalid scenario, policy, or profile configuration.
class ConfigError : public Error {
  public:
    using Error::Error;
};

class ClockError : public Error {
  public:
    using Error::Error;
};

/// A record larger than the per-record size cap.
class OversizeRecord : public Error {
  public:
    using Error::Error;
};

class ShardNotFound : public Error {
  public:
    using Error::Error;
};

/// Split or merge refused by the shard-count bounds or range adjacency.
/// Not fatal: the autoscaler logs it and moves on.
class ScaleRefused : public Error {
  public:
    using Error::Error;
};

/// Backfill request outside the search horizon.
class WindowExpired : public Error {
  public:
    using Error::Error;
};

/// Batch handed to the hot store is empty, multi-shard, or non-contiguous.
class CorruptBatch : public Error {
  public:
    using Error::Error;
};

/// An internal invariant does not hold. Always a bug.
class InvariantViolation : public Error {
  public:
    using Error::Error;
};

constexpr std::uint64_t kMiB = 1024 * 1024;
constexpr std::uint64_t kKiB = 1024;
constexpr double kGiB = 1024.0 * 1024.0 * 1024.0;

/// Largest payload the stream admits.
constexpr std::uint64_t kMaxRecordBytes = kMiB;

// ---------------------------------------------------------------------------
// Record

struct Record {
    /// Source-assigned identity; survives backfill re-publication.
    std::uint64_t record_id = 0;
    std::string payload;
    std::string partition_key;
    std::string source_id;
    VTime created_at{0};
    /// Set by the stream on admission.
    VTime put_at{0};
    /// Set by the stream on admission; per-shard, starting at 0.
    std::uint64_t sequence = 0;

    std::uint64_t size_bytes() const noexcept { return payload.size(); }
};

using RecordPtr = std::shared_ptr<const Record>;

// ---------------------------------------------------------------------------
// Limits and policies

struct ShardLimits {
    std::uint64_t write_bytes_per_sec = kMiB;
    std::uint64_t write_records_per_sec = 1000;
    std::uint64_t read_bytes_per_sec = 2 * kMiB;
    std::uint64_t read_requests_per_sec = 5;
};

enum class RegionClass { small, large };

struct ProjectLimits {
    RegionClass region_class = RegionClass::large;
    std::uint64_t write_bytes_per_sec = 200 * kMiB;
    std::uint64_t read_bytes_per_sec = 400 * kMiB;

    static ProjectLimits for_region(RegionClass region);
};

struct ScalingPolicy {
    std::uint64_t up_bytes_per_sec = 800 * kKiB;
    std::uint64_t up_records_per_sec = 800;
    std::uint64_t down_bytes_per_sec = 500 * kKiB;
    std::uint64_t down_records_per_sec = 500;
    VTime down_delay = 3 * kHour;
    VTime metric_window = 60 * kSecond;
    int min_shards = 1;
    int max_shards = 16;
};

struct RetentionPolicy {
    VTime duration = 24 * kHour;

    static RetentionPolicy one_day() { return {}; }
    static RetentionPolicy seven_days() { return {7 * kDay}; }
};

struct SourceLimits {
    std::uint64_t delivery_records_per_sec = 50;
    bool unlimited = false;
};

// Each validator throws ConfigError naming the first violated invariant.
void validate(const ShardLimits& limits);
void validate(const ProjectLimits& limits);
void validate(const ScalingPolicy& policy, const ShardLimits& limits);
void validate(const RetentionPolicy& retention);
void validate(const SourceLimits& limits);

/// Checks that every default-constructed policy satisfies its invariants.
void check_default_config();

std::string to_string(RegionClass region);
RegionClass parse_region_class(const std::string& text);

} // namespace smmon
