#include "smmon/stream.hpp"

#include <algorithm>
#include <charconv>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "smmon/hash.hpp"

namespace smmon {

namespace {

constexpr std::uint64_t kHashMax = ~std::uint64_t{0};

std::uint64_t shard_number(const std::string& id)
{
    std::uint64_t n = 0;
    if (id.size() < 2 || id[0] != 's')
        return kHashMax;
    auto [p, ec] = std::from_chars(id.data() + 1, id.data() + id.size(), n);
    if (ec != std::errc{} || p != id.data() + id.size())
        return kHashMax;
    return n;
}

} // namespace

std::string to_string(PutVerdict v)
{
    switch (v) {
    case PutVerdict::accepted:
        return "accepted";
    case PutVerdict::throttled:
        return "throttled";
    case PutVerdict::project_throttled:
        return "project_throttled";
    case PutVerdict::unavailable:
        return "unavailable";
    }
    return "?";
}

std::string format_admit_line(const AdmitEntry& e)
{
    std::string line = std::to_string(e.now.count());
    line += ',';
    line += e.shard_id;
    line += ',';
    line += to_string(e.verdict);
    line += ',';
    line += std::to_string(e.size_bytes);
    return line;
}

AdmitEntry parse_admit_line(const std::string& line)
{
    std::istringstream in(line);
    std::string now, shard, verdict, size;
    if (!std::getline(in, now, ',') || !std::getline(in, shard, ',') || !std::getline(in, verdict, ',') ||
        !std::getline(in, size))
        throw std::invalid_argument("malformed admit line '" + line + "'");
    AdmitEntry e{VTime{std::stoll(now)}, shard, PutVerdict::accepted, std::stoull(size)};
    if (verdict == "accepted")
        e.verdict = PutVerdict::accepted;
    else if (verdict == "throttled")
        e.verdict = PutVerdict::throttled;
    else if (verdict == "project_throttled")
        e.verdict = PutVerdict::project_throttled;
    else if (verdict == "unavailable")
        e.verdict = PutVerdict::unavailable;
    else
        throw std::invalid_argument("unknown verdict '" + verdict + "'");
    return e;
}

ShardedStream::ShardedStream(StreamConfig config, VTime now)
    : config_(std::move(config))
    , project_write_(config_.project.write_bytes_per_sec, now)
    , project_read_(config_.project.read_bytes_per_sec, now)
    , last_collect_(now)
{
    validate(config_.limits);
    validate(config_.retention);
    validate(config_.project);
    if (config_.min_shards < 1 || config_.min_shards > config_.max_shards)
        throw ConfigError("stream needs 1 <= min_shards <= max_shards");

    // Initial shards tile the hash space evenly.
    const auto n = static_cast<std::uint64_t>(config_.min_shards);
    const std::uint64_t width = kHashMax / n;
    for (std::uint64_t i = 0; i < n; ++i) {
        const std::uint64_t low = i * width;
        const std::uint64_t high = (i + 1 == n) ? kHashMax : (i + 1) * width - 1;
        open_new_shard({low, high}, now);
    }
    check_partition();
}

ShardedStream::Shard& ShardedStream::open_new_shard(HashRange range, VTime now)
{
    const auto number = next_shard_number_++;
    Shard s;
    s.id = "s" + std::to_string(number);
    s.range = range;
    s.created_at = now;
    s.write_records = TokenBucket(config_.limits.write_records_per_sec, now);
    s.write_bytes = TokenBucket(config_.limits.write_bytes_per_sec, now);
    s.read_requests = TokenBucket(config_.limits.read_requests_per_sec, now);
    s.read_bytes = TokenBucket(config_.limits.read_bytes_per_sec, now);
    auto& ref = shards_.emplace(number, std::move(s)).first->second;
    open_by_low_[range.low] = number;
    return ref;
}

ShardedStream::Shard* ShardedStream::find(const std::string& id)
{
    auto it = shards_.find(shard_number(id));
    return it == shards_.end() ? nullptr : &it->second;
}

const ShardedStream::Shard* ShardedStream::find(const std::string& id) const
{
    auto it = shards_.find(shard_number(id));
    return it == shards_.end() ? nullptr : &it->second;
}

ShardedStream::Shard& ShardedStream::route_locked(std::uint64_t hash)
{
    auto it = open_by_low_.upper_bound(hash);
    if (it == open_by_low_.begin())
        throw InvariantViolation("no open shard covers hash " + std::to_string(hash));
    --it;
    auto& s = shards_.at(it->second);
    if (!s.range.contains(hash))
        throw InvariantViolation("no open shard covers hash " + std::to_string(hash));
    return s;
}

void ShardedStream::check_partition() const
{
    std::uint64_t expect = 0;
    bool first = true;
    for (const auto& [low, number] : open_by_low_) {
        const auto& s = shards_.at(number);
        if (s.state != ShardState::open || s.range.low != low || (!first && low != expect) ||
            (first && low != 0))
            throw InvariantViolation("open shard ranges do not partition the hash space");
        first = false;
        expect = s.range.high + 1;
        if (s.range.high == kHashMax)
            return;
    }
    throw InvariantViolation("open shard ranges do not reach the top of the hash space");
}

PutResult ShardedStream::put(const Record& record, VTime now)
{
    if (record.partition_key.empty())
        throw std::invalid_argument("put: empty partition key");
    if (record.size_bytes() > kMaxRecordBytes)
        throw OversizeRecord("put: record of " + std::to_string(record.size_bytes()) + " bytes exceeds 1 MiB");
    if (now < record.created_at)
        throw std::invalid_argument("put: now precedes the record's created_at");

    const auto hash = partition_hash(record.partition_key);
    const auto size = record.size_bytes();

    std::lock_guard lock(mu_);
    auto& s = route_locked(hash);
    PutResult result{PutVerdict::accepted, s.id, 0};
    if (!available_) {
        result.verdict = PutVerdict::unavailable;
    } else {
        s.write_records.refill(now);
        s.write_bytes.refill(now);
        project_write_.refill(now);
        if (!s.write_records.can_take(1) || !s.write_bytes.can_take(size)) {
            result.verdict = PutVerdict::throttled;
        } else if (!project_write_.can_take(size)) {
            result.verdict = PutVerdict::project_throttled;
        } else {
            s.write_records.take(1);
            s.write_bytes.take(size);
            project_write_.take(size);
            auto stored = std::make_shared<Record>(record);
            stored->put_at = s.records.empty() ? now : std::max(now, s.records.back()->put_at);
            stored->sequence = s.next_sequence++;
            if (s.records.empty())
                s.base_sequence = stored->sequence;
            result.sequence = stored->sequence;
            s.records.push_back(std::move(stored));
            ++s.window_records;
            s.window_bytes += size;
            ++total_put_;
            bytes_put_ += size;
        }
        if (result.verdict != PutVerdict::accepted)
            ++total_throttled_;
    }
    if (observer_)
        observer_(AdmitEntry{now, s.id, result.verdict, size});
    return result;
}

std::size_t ShardedStream::expire_shard(Shard& s, VTime now)
{
    std::size_t n = 0;
    while (!s.records.empty() && s.records.front()->put_at + config_.retention.duration <= now) {
        s.records.pop_front();
        ++s.base_sequence;
        ++n;
    }
    if (s.records.empty())
        s.base_sequence = s.next_sequence;
    total_expired_ += n;
    return n;
}

ReadResult ShardedStream::get_records(const ShardIterator& it, std::size_t max_records, VTime now)
{
    std::lock_guard lock(mu_);
    ReadResult result;
    result.next = it;
    Shard* s = find(it.shard_id);
    if (s == nullptr) {
        if (retired_.count(it.shard_id) != 0)
            return result;
        throw ShardNotFound("unknown shard '" + it.shard_id + "'");
    }
    expire_shard(*s, now);
    s->read_requests.refill(now);
    s->read_bytes.refill(now);
    project_read_.refill(now);
    if (!s->read_requests.can_take(1)) {
        result.status = ReadStatus::throttled;
        return result;
    }

    const std::uint64_t start = std::max(it.next_sequence, s->base_sequence);
    const std::uint64_t budget = std::min(s->read_bytes.available(), project_read_.available());
    std::uint64_t bytes = 0;
    for (std::uint64_t seq = start; seq < s->next_sequence && result.records.size() < max_records; ++seq) {
        const auto& r = s->records[seq - s->base_sequence];
        if (bytes + r->size_bytes() > budget)
            break;
        bytes += r->size_bytes();
        result.records.push_back(r);
    }
    if (result.records.empty() && start < s->next_sequence && max_records > 0) {
        result.status = ReadStatus::throttled;
        return result;
    }
    s->read_requests.take(1);
    s->read_bytes.take(bytes);
    project_read_.take(bytes);
    bytes_read_ += bytes;
    if (!result.records.empty())
        result.next.next_sequence = result.records.back()->sequence + 1;
    return result;
}

ShardIterator ShardedStream::trim_horizon(const std::string& shard_id) const
{
    std::lock_guard lock(mu_);
    const Shard* s = find(shard_id);
    if (s == nullptr) {
        auto r = retired_.find(shard_id);
        if (r == retired_.end())
            throw ShardNotFound("unknown shard '" + shard_id + "'");
        return {shard_id, r->second};
    }
    return {shard_id, s->base_sequence};
}

std::size_t ShardedStream::expire(VTime now)
{
    std::lock_guard lock(mu_);
    std::size_t n = 0;
    for (auto& [number, s] : shards_)
        n += expire_shard(s, now);
    collect_garbage();
    return n;
}

void ShardedStream::collect_garbage()
{
    for (auto it = shards_.begin(); it != shards_.end();) {
        const auto& s = it->second;
        if (s.state == ShardState::closed && s.records.empty()) {
            retired_[s.id] = s.next_sequence;
            it = shards_.erase(it);
        } else {
            ++it;
        }
    }
}

std::pair<std::string, std::string> ShardedStream::split_shard(const std::string& shard_id, VTime now)
{
    std::lock_guard lock(mu_);
    Shard* s = find(shard_id);
    if (s == nullptr)
        throw ShardNotFound("unknown shard '" + shard_id + "'");
    if (s->state != ShardState::open)
        throw ScaleRefused("split: shard " + shard_id + " is closed");
    if (static_cast<int>(open_by_low_.size()) >= config_.max_shards)
        throw ScaleRefused("split: already at max_shards=" + std::to_string(config_.max_shards));
    if (s->range.low == s->range.high)
        throw ScaleRefused("split: shard " + shard_id + " owns a single hash value");

    const HashRange parent = s->range;
    const std::uint64_t mid = parent.low + (parent.high - parent.low) / 2;
    s->state = ShardState::closed;
    s->closed_at = now;
    open_by_low_.erase(parent.low);
    const std::string a = open_new_shard({parent.low, mid}, now).id;
    const std::string b = open_new_shard({mid + 1, parent.high}, now).id;
    check_partition();
    return {a, b};
}

std::string ShardedStream::merge_shards(const std::string& a_id, const std::string& b_id, VTime now)
{
    std::lock_guard lock(mu_);
    Shard* a = find(a_id);
    Shard* b = find(b_id);
    if (a == nullptr || b == nullptr)
        throw ShardNotFound("merge: unknown shard");
    if (a->state != ShardState::open || b->state != ShardState::open || a == b)
        throw ScaleRefused("merge: both shards must be distinct and open");
    if (static_cast<int>(open_by_low_.size()) <= config_.min_shards)
        throw ScaleRefused("merge: already at min_shards=" + std::to_string(config_.min_shards));
    if (b->range.low < a->range.low)
        std::swap(a, b);
    if (a->range.high == kHashMax || a->range.high + 1 != b->range.low)
        throw ScaleRefused("merge: shards " + a_id + " and " + b_id + " are not adjacent");

    const HashRange merged{a->range.low, b->range.high};
    for (Shard* p : {a, b}) {
        p->state = ShardState::closed;
        p->closed_at = now;
        open_by_low_.erase(p->range.low);
    }
    const std::string child = open_new_shard(merged, now).id;
    check_partition();
    return child;
}

MetricsWindow ShardedStream::collect_metrics(VTime window, VTime now)
{
    if (window <= VTime{0})
        throw std::invalid_argument("collect_metrics: window must be positive");
    std::lock_guard lock(mu_);
    MetricsWindow m;
    m.window = window;
    m.end = now;
    const double secs = static_cast<double>(window.count()) / 1000.0;
    std::uint64_t recs = 0;
    std::uint64_t bytes = 0;
    for (auto& [number, s] : shards_) {
        if (s.state == ShardState::open) {
            m.per_shard[s.id] = {static_cast<double>(s.window_records) / secs,
                                 static_cast<double>(s.window_bytes) / secs};
            recs += s.window_records;
            bytes += s.window_bytes;
            ++m.open_shards;
        }
        s.window_records = 0;
        s.window_bytes = 0;
    }
    if (m.open_shards > 0) {
        m.avg_per_open_shard = {static_cast<double>(recs) / (secs * m.open_shards),
                                static_cast<double>(bytes) / (secs * m.open_shards)};
    }
    last_collect_ = now;
    return m;
}

std::optional<std::vector<RecordPtr>> ShardedStream::scan(const std::string& shard_id, std::uint64_t first,
                                                          std::uint64_t last, VTime now)
{
    std::lock_guard lock(mu_);
    const Shard* s = find(shard_id);
    if (s == nullptr || first > last || first < s->base_sequence || last >= s->next_sequence)
        return std::nullopt;
    const auto& oldest = s->records[first - s->base_sequence];
    if (oldest->put_at + config_.retention.duration <= now)
        return std::nullopt;
    std::vector<RecordPtr> out;
    out.reserve(last - first + 1);
    for (auto seq = first; seq <= last; ++seq)
        out.push_back(s->records[seq - s->base_sequence]);
    return out;
}

std::string ShardedStream::route(const std::string& partition_key) const
{
    std::lock_guard lock(mu_);
    return const_cast<ShardedStream*>(this)->route_locked(partition_hash(partition_key)).id;
}

ShardInfo ShardedStream::info(const Shard& s)
{
    ShardInfo i{s.id, s.state, s.range, s.created_at, s.closed_at, s.base_sequence, s.next_sequence,
                s.records.size(), std::nullopt};
    if (!s.records.empty())
        i.oldest_put_at = s.records.front()->put_at;
    return i;
}

std::vector<ShardInfo> ShardedStream::shards() const
{
    std::lock_guard lock(mu_);
    std::vector<ShardInfo> out;
    out.reserve(shards_.size());
    for (const auto& [number, s] : shards_)
        out.push_back(info(s));
    return out;
}

std::optional<ShardInfo> ShardedStream::shard(const std::string& shard_id) const
{
    std::lock_guard lock(mu_);
    const Shard* s = find(shard_id);
    if (s == nullptr)
        return std::nullopt;
    return info(*s);
}

std::map<std::string, std::uint64_t> ShardedStream::retired_shards() const
{
    std::lock_guard lock(mu_);
    return retired_;
}

int ShardedStream::open_shard_count() const
{
    std::lock_guard lock(mu_);
    return static_cast<int>(open_by_low_.size());
}

void ShardedStream::set_available(bool available)
{
    std::lock_guard lock(mu_);
    available_ = available;
}

bool ShardedStream::available() const
{
    std::lock_guard lock(mu_);
    return available_;
}

void ShardedStream::set_admit_observer(AdmitObserver observer)
{
    std::lock_guard lock(mu_);
    observer_ = std::move(observer);
}

std::uint64_t ShardedStream::total_put() const
{
    std::lock_guard lock(mu_);
    return total_put_;
}

std::uint64_t ShardedStream::total_expired() const
{
    std::lock_guard lock(mu_);
    return total_expired_;
}

std::uint64_t ShardedStream::total_throttled() const
{
    std::lock_guard lock(mu_);
    return total_throttled_;
}

std::uint64_t ShardedStream::readable_count() const
{
    std::lock_guard lock(mu_);
    std::uint64_t n = 0;
    for (const auto& [number, s] : shards_)
        n += s.records.size();
    return n;
}

std::uint64_t ShardedStream::bytes_put() const
{
    std::lock_guard lock(mu_);
    return bytes_put_;
}

std::uint64_t ShardedStream::bytes_read() const
{
    std::lock_guard lock(mu_);
    return bytes_read_;
}

void ShardedStream::write_snapshot(std::ostream& out) const
{
    std::lock_guard lock(mu_);
    out << "stream " << config_.stream_id << '\n';
    out << "total_put " << total_put_ << "\ntotal_expired " << total_expired_ << "\ntotal_throttled "
        << total_throttled_ << '\n';
    for (const auto& [number, s] : shards_) {
        out << "shard " << s.id << ' ' << (s.state == ShardState::open ? "open" : "closed") << ' '
            << s.range.low << ' ' << s.range.high << " created=" << s.created_at.count();
        if (s.closed_at)
            out << " closed=" << s.closed_at->count();
        out << " first=" << s.base_sequence << " next=" << s.next_sequence << " stored=" << s.records.size()
            << '\n';
    }
    for (const auto& [id, next] : retired_)
        out << "retired " << id << " next=" << next << '\n';
}

} // namespace smmon
