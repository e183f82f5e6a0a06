#include "smmon/storage.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string_view>
#include <tuple>
#include <unordered_map>

#include "smmon/codec.hpp"
#include "smmon/source.hpp"

namespace fs = std::filesystem;

namespace smmon {

namespace {

void append_number(std::string& out, std::int64_t v)
{
    char buf[24];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, end);
}

void append_number(std::string& out, std::uint64_t v)
{
    char buf[24];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, end);
}

template <typename T>
T parse_field(std::string_view text, std::string_view what)
{
    T v{};
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || end != text.data() + text.size())
        throw std::invalid_argument("record line: bad " + std::string(what));
    return v;
}

std::int64_t floor_div(std::int64_t a, std::int64_t b)
{
    std::int64_t q = a / b;
    if ((a % b != 0) && ((a < 0) != (b < 0)))
        --q;
    return q;
}

std::int64_t bucket_of(VTime t) { return floor_div(t.count(), kMinute.count()); }

} // namespace

std::string format_record_line(const Record& r, std::string_view shard_id)
{
    std::string out;
    out.reserve(64 + r.partition_key.size() + r.payload.size() * 4 / 3);
    append_number(out, r.record_id);
    out += '\t';
    out += shard_id;
    out += '\t';
    append_number(out, r.sequence);
    out += '\t';
    append_number(out, static_cast<std::int64_t>(r.created_at.count()));
    out += '\t';
    append_number(out, static_cast<std::int64_t>(r.put_at.count()));
    out += '\t';
    out += r.partition_key;
    out += '\t';
    out += base64_encode(r.payload);
    return out;
}

ArchivedRecord parse_record_line(std::string_view line)
{
    std::vector<std::string_view> f;
    std::size_t pos = 0;
    while (f.size() < 6) {
        const auto tab = line.find('\t', pos);
        if (tab == std::string_view::npos)
            throw std::invalid_argument("record line: expected 7 tab-separated fields");
        f.push_back(line.substr(pos, tab - pos));
        pos = tab + 1;
    }
    f.push_back(line.substr(pos));
    if (f.back().find('\t') != std::string_view::npos)
        throw std::invalid_argument("record line: too many fields");

    ArchivedRecord r;
    r.record_id = parse_field<std::uint64_t>(f[0], "record_id");
    r.shard_id = std::string(f[1]);
    r.sequence = parse_field<std::uint64_t>(f[2], "sequence");
    r.created_at = VTime{parse_field<std::int64_t>(f[3], "created_at")};
    r.put_at = VTime{parse_field<std::int64_t>(f[4], "put_at")};
    r.partition_key = std::string(f[5]);
    r.payload = base64_decode(f[6]);
    return r;
}

// ---------------------------------------------------------------------------
// HotStore

HotStore::HotStore(std::string stream_id, HotStoreConfig config)
    : stream_id_(std::move(stream_id))
    , config_(config)
{
}

std::string HotStore::object_key(std::string_view stream_id, std::string_view shard_id, std::uint64_t first,
                                 std::uint64_t last)
{
    std::string key;
    key += stream_id;
    key += '/';
    key += shard_id;
    key += '/';
    append_number(key, first);
    key += '-';
    append_number(key, last);
    return key;
}

std::optional<std::string> HotStore::stage(const Batch& batch, VTime now)
{
    if (batch.records.empty())
        throw CorruptBatch("empty batch");
    if (batch.shard_id.empty())
        throw CorruptBatch("batch without a shard id");
    for (std::size_t i = 0; i < batch.records.size(); ++i) {
        if (!batch.records[i])
            throw CorruptBatch("null record in batch");
        if (i > 0 && batch.records[i]->sequence != batch.records[i - 1]->sequence + 1)
            throw CorruptBatch("batch sequences are not contiguous");
    }
    if (!available_)
        return std::nullopt;

    const auto first = batch.records.front()->sequence;
    const auto last = batch.records.back()->sequence;
    auto key = object_key(stream_id_, batch.shard_id, first, last);

    auto [it, inserted] = objects_.try_emplace(key);
    HotObject& obj = it->second;
    if (inserted) {
        obj.key = key;
        obj.shard_id = batch.shard_id;
        obj.first_sequence = first;
        obj.last_sequence = last;
        obj.written_at = now;
        by_shard_[batch.shard_id][first] = key;
    }
    obj.records = batch.records;
    obj.present = true;
    obj.min_created = obj.max_created = batch.records.front()->created_at;
    for (const auto& r : batch.records) {
        obj.min_created = std::min(obj.min_created, r->created_at);
        obj.max_created = std::max(obj.max_created, r->created_at);
        bytes_written_ += r->size_bytes();
    }
    return key;
}

const HotObject* HotStore::get(const std::string& key) const
{
    auto it = objects_.find(key);
    return it == objects_.end() ? nullptr : &it->second;
}

const HotObject* HotStore::find(const std::string& shard_id, std::uint64_t sequence) const
{
    auto s = by_shard_.find(shard_id);
    if (s == by_shard_.end())
        return nullptr;
    auto it = s->second.upper_bound(sequence);
    if (it == s->second.begin())
        return nullptr;
    --it;
    const HotObject* obj = get(it->second);
    if (!obj || !obj->present || obj->last_sequence < sequence)
        return nullptr;
    return obj;
}

std::vector<const HotObject*> HotStore::due_for_archive(VTime now, bool force) const
{
    std::vector<const HotObject*> out;
    for (const auto& [key, obj] : objects_)
        if (obj.present && !obj.archived && (force || obj.written_at + config_.archive_age <= now))
            out.push_back(&obj);
    return out;
}

void HotStore::mark_archived(const std::vector<std::string>& keys)
{
    for (const auto& k : keys) {
        auto it = objects_.find(k);
        if (it != objects_.end())
            it->second.archived = true;
    }
}

std::size_t HotStore::purge(VTime now)
{
    if (!available_)
        return 0;
    std::size_t n = 0;
    for (auto& [key, obj] : objects_) {
        if (obj.present && obj.archived && obj.written_at + config_.retention <= now) {
            obj.records.clear();
            obj.records.shrink_to_fit();
            obj.present = false;
            ++n;
        }
    }
    return n;
}

bool HotStore::erase(const std::string& key)
{
    auto it = objects_.find(key);
    if (it == objects_.end() || !it->second.present)
        return false;
    it->second.records.clear();
    it->second.records.shrink_to_fit();
    it->second.present = false;
    return true;
}

void HotStore::restore(const std::string& key, std::vector<RecordPtr> records)
{
    auto it = objects_.find(key);
    if (it == objects_.end())
        throw std::invalid_argument("restore: unknown hot object " + key);
    it->second.records = std::move(records);
    it->second.present = true;
}

std::string HotStore::serialize(const std::string& key) const
{
    const HotObject* obj = get(key);
    if (!obj)
        throw std::invalid_argument("serialize: unknown hot object " + key);
    std::string out;
    for (const auto& r : obj->records) {
        out += format_record_line(*r, obj->shard_id);
        out += '\n';
    }
    return out;
}

std::size_t HotStore::present_count() const
{
    std::size_t n = 0;
    for (const auto& [key, obj] : objects_)
        n += obj.present ? 1 : 0;
    return n;
}

bool HotStore::put_checkpoint(std::string text)
{
    if (!available_)
        return false;
    checkpoint_ = std::move(text);
    return true;
}

// ---------------------------------------------------------------------------
// SummaryTable

SummaryTable::SummaryTable(std::vector<std::string> keywords)
    : keywords_(std::move(keywords))
{
}

std::string SummaryTable::keyword_of(const Record& r) const
{
    if (auto tag = keyword_tag(r.payload, keywords_))
        return std::string(*tag);
    return std::string(kNoKeyword);
}

std::vector<SummaryRow> SummaryTable::summarize(const HotObject& object)
{
    if (!summarized_.insert(object.key).second)
        return {};
    std::set<std::pair<std::int64_t, std::string>> touched;
    for (const auto& r : object.records) {
        std::pair<std::int64_t, std::string> k{bucket_of(r->created_at), keyword_of(*r)};
        auto& cell = rows_[k];
        cell.first += 1;
        cell.second += r->size_bytes();
        touched.insert(std::move(k));
    }
    std::vector<SummaryRow> out;
    for (const auto& k : touched) {
        const auto& cell = rows_.at(k);
        out.push_back({k.first, k.second, cell.first, cell.second});
    }
    return out;
}

void SummaryTable::erase_buckets(std::int64_t from_minute, std::int64_t to_minute)
{
    auto lo = rows_.lower_bound({from_minute, std::string()});
    auto hi = rows_.lower_bound({to_minute, std::string()});
    rows_.erase(lo, hi);
}

void SummaryTable::add(std::int64_t bucket_minute, const std::string& keyword, std::uint64_t records,
                       std::uint64_t bytes)
{
    auto& cell = rows_[{bucket_minute, keyword}];
    cell.first += records;
    cell.second += bytes;
}

std::vector<SummaryRow> SummaryTable::rows() const
{
    std::vector<SummaryRow> out;
    out.reserve(rows_.size());
    for (const auto& [k, v] : rows_)
        out.push_back({k.first, k.second, v.first, v.second});
    return out;
}

std::uint64_t SummaryTable::total_records() const
{
    std::uint64_t n = 0;
    for (const auto& [k, v] : rows_)
        n += v.first;
    return n;
}

void SummaryTable::write_csv(std::ostream& out) const
{
    out << "bucket_minute,keyword,record_count,byte_count\n";
    for (const auto& [k, v] : rows_)
        out << k.first << ',' << k.second << ',' << v.first << ',' << v.second << '\n';
}

// ---------------------------------------------------------------------------
// IdSet

namespace {
constexpr std::uint64_t kPageBits = 65536;
constexpr std::uint64_t kPageWords = kPageBits / 64;
} // namespace

bool IdSet::insert(std::uint64_t id)
{
    auto& page = pages_[id / kPageBits];
    if (page.empty())
        page.assign(kPageWords, 0);
    const auto bit = id % kPageBits;
    auto& word = page[bit / 64];
    const std::uint64_t mask = std::uint64_t{1} << (bit % 64);
    if (word & mask)
        return false;
    word |= mask;
    ++size_;
    return true;
}

bool IdSet::contains(std::uint64_t id) const
{
    auto it = pages_.find(id / kPageBits);
    if (it == pages_.end())
        return false;
    const auto bit = id % kPageBits;
    return (it->second[bit / 64] >> (bit % 64)) & 1;
}

// ---------------------------------------------------------------------------
// ColdArchive

ColdArchive::ColdArchive(fs::path root)
    : root_(std::move(root))
{
}

bool ColdArchive::contains(const std::string& shard_id, std::uint64_t sequence) const
{
    auto s = sequences_.find(shard_id);
    if (s == sequences_.end())
        return false;
    auto it = s->second.upper_bound(sequence);
    if (it == s->second.begin())
        return false;
    --it;
    return sequence <= it->second;
}

bool ColdArchive::delete_segment(const std::string& path)
{
    std::error_code ec;
    return fs::remove(root_ / path, ec);
}

namespace {

bool write_file(const fs::path& path, const std::string& content)
{
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec)
        return false;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        return false;
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    return static_cast<bool>(out);
}

void add_run(std::map<std::uint64_t, std::uint64_t>& runs, std::uint64_t seq)
{
    auto next = runs.upper_bound(seq);
    if (next != runs.begin()) {
        auto prev = std::prev(next);
        if (seq <= prev->second)
            return;
        if (prev->second + 1 == seq) {
            prev->second = seq;
            if (next != runs.end() && next->first == seq + 1) {
                prev->second = next->second;
                runs.erase(next);
            }
            return;
        }
    }
    if (next != runs.end() && next->first == seq + 1) {
        const auto last = next->second;
        runs.erase(next);
        runs.emplace(seq, last);
        return;
    }
    runs.emplace(seq, seq);
}

} // namespace

bool ColdArchive::write_segments(const std::vector<std::pair<RecordPtr, std::string>>& records)
{
    if (!available_)
        return false;
    if (records.empty())
        return true;

    std::vector<ArchiveSegment> fresh;
    std::vector<std::string> contents;
    std::uint64_t n = next_segment_;
    for (std::size_t i = 0; i < records.size();) {
        const auto day = simulated_date(records[i].first->created_at);
        ArchiveSegment seg;
        seg.path = day + "-simulated/segment-" + std::to_string(n++);
        seg.min_created = seg.max_created = records[i].first->created_at;
        std::string content;
        std::size_t j = i;
        for (; j < records.size() && simulated_date(records[j].first->created_at) == day; ++j) {
            const auto& [r, shard] = records[j];
            seg.min_created = std::min(seg.min_created, r->created_at);
            seg.max_created = std::max(seg.max_created, r->created_at);
            seg.keys.push_back({shard, r->sequence, r->record_id});
            content += format_record_line(*r, shard);
            content += '\n';
        }
        fresh.push_back(std::move(seg));
        contents.push_back(std::move(content));
        i = j;
    }

    for (std::size_t k = 0; k < fresh.size(); ++k) {
        if (!write_file(root_ / fresh[k].path, contents[k])) {
            std::error_code ec;
            for (std::size_t m = 0; m <= k; ++m)
                fs::remove(root_ / fresh[m].path, ec);
            return false;
        }
    }

    next_segment_ = n;
    for (std::size_t k = 0; k < fresh.size(); ++k) {
        bytes_written_ += contents[k].size();
        for (const auto& key : fresh[k].keys) {
            add_run(sequences_[key.shard_id], key.sequence);
            record_ids_.insert(key.record_id);
        }
        segments_.push_back(std::move(fresh[k]));
    }
    return true;
}

bool ColdArchive::rewrite_segment(const ArchiveSegment& segment,
                                  const std::vector<std::pair<RecordPtr, std::string>>& records)
{
    if (!available_)
        return false;
    std::string content;
    for (const auto& [r, shard] : records) {
        content += format_record_line(*r, shard);
        content += '\n';
    }
    if (!write_file(root_ / segment.path, content))
        return false;
    bytes_written_ += content.size();
    return true;
}

// ---------------------------------------------------------------------------
// Sweep

SweepResult archive_sweep(HotStore& hot, ColdArchive& cold, VTime now, bool force)
{
    SweepResult result;
    if (!hot.available() || !cold.available()) {
        result.ok = false;
        return result;
    }
    const auto due = hot.due_for_archive(now, force);
    if (due.empty())
        return result;

    struct Entry {
        VTime created_at;
        std::uint64_t record_id;
        const std::string* shard;
        std::uint64_t sequence;
        RecordPtr rec;
    };
    std::vector<Entry> picked;
    std::unordered_map<std::string_view, IdSet> seen_keys;
    IdSet seen_ids;
    std::vector<std::string> keys;
    for (const HotObject* obj : due) {
        keys.push_back(obj->key);
        auto& seen_seq = seen_keys[obj->shard_id];
        for (const auto& r : obj->records) {
            if (cold.contains(obj->shard_id, r->sequence) || cold.contains_record(r->record_id) ||
                seen_ids.contains(r->record_id) || !seen_seq.insert(r->sequence)) {
                ++result.duplicates_dropped;
                continue;
            }
            seen_ids.insert(r->record_id);
            picked.push_back({r->created_at, r->record_id, &obj->shard_id, r->sequence, r});
        }
    }
    std::sort(picked.begin(), picked.end(), [](const Entry& a, const Entry& b) {
        return std::tie(a.created_at, a.record_id, *a.shard, a.sequence) <
               std::tie(b.created_at, b.record_id, *b.shard, b.sequence);
    });
    std::vector<std::pair<RecordPtr, std::string>> entries;
    entries.reserve(picked.size());
    for (auto& e : picked)
        entries.emplace_back(std::move(e.rec), *e.shard);

    const auto before = cold.segments().size();
    if (!cold.write_segments(entries)) {
        result.ok = false;
        result.duplicates_dropped = 0;
        return result;
    }
    hot.mark_archived(keys);
    result.segments_written = cold.segments().size() - before;
    result.objects_retired = keys.size();
    result.records_archived = entries.size();
    return result;
}

// ---------------------------------------------------------------------------
// Recovery

std::string to_string(Tier t)
{
    switch (t) {
    case Tier::stream:
        return "stream";
    case Tier::hot:
        return "hot";
    case Tier::summary:
        return "summary";
    case Tier::archive:
        return "archive";
    }
    return "?";
}

Tier parse_tier(const std::string& text)
{
    for (auto t : {Tier::stream, Tier::hot, Tier::summary, Tier::archive})
        if (to_string(t) == text)
            return t;
    throw std::invalid_argument("unknown tier '" + text + "'");
}

namespace {

std::int64_t ceil_minute(VTime t) { return -floor_div(-t.count(), kMinute.count()); }

RecoveryReport recover_hot(Interval range, StorageTiers tiers, ShardedStream& stream, VTime now)
{
    RecoveryReport rep;
    std::vector<std::pair<std::string, std::vector<RecordPtr>>> restored;
    for (const auto& [key, obj] : tiers.hot.objects()) {
        if (obj.present || !range.contains(obj.written_at))
            continue;
        auto recs = stream.scan(obj.shard_id, obj.first_sequence, obj.last_sequence, now);
        if (recs) {
            rep.restored += recs->size();
            restored.emplace_back(key, std::move(*recs));
        } else {
            rep.unrecoverable.push_back({Tier::hot, key, {obj.written_at, obj.written_at + VTime{1}},
                                         static_cast<std::size_t>(obj.last_sequence - obj.first_sequence + 1)});
        }
    }
    for (auto& [key, recs] : restored)
        tiers.hot.restore(key, std::move(recs));
    return rep;
}

RecoveryReport recover_summary(Interval range, StorageTiers tiers)
{
    RecoveryReport rep;
    const auto from = ceil_minute(range.start);
    const auto to = ceil_minute(range.end);
    if (from >= to)
        return rep;

    std::map<std::pair<std::int64_t, std::string>, std::pair<std::uint64_t, std::uint64_t>> rebuilt;
    for (const auto& key : tiers.summary.summarized_keys()) {
        const HotObject* obj = tiers.hot.get(key);
        if (!obj)
            continue;
        const auto lo = bucket_of(obj->min_created);
        const auto hi = bucket_of(obj->max_created);
        if (hi < from || lo >= to)
            continue;
        if (!obj->present) {
            rep.unrecoverable.push_back(
                {Tier::summary, key, {obj->min_created, obj->max_created + VTime{1}},
                 static_cast<std::size_t>(obj->last_sequence - obj->first_sequence + 1)});
            continue;
        }
        for (const auto& r : obj->records) {
            const auto b = bucket_of(r->created_at);
            if (b < from || b >= to)
                continue;
            auto& cell = rebuilt[{b, tiers.summary.keyword_of(*r)}];
            cell.first += 1;
            cell.second += r->size_bytes();
            ++rep.restored;
        }
    }
    tiers.summary.erase_buckets(from, to);
    for (const auto& [k, v] : rebuilt)
        tiers.summary.add(k.first, k.second, v.first, v.second);
    return rep;
}

RecoveryReport recover_archive(Tier source, Interval range, StorageTiers tiers, ShardedStream& stream, VTime now)
{
    RecoveryReport rep;
    for (const auto& seg : tiers.cold.segments()) {
        if (seg.max_created < range.start || seg.min_created >= range.end)
            continue;
        if (fs::exists(tiers.cold.root() / seg.path))
            continue;
        std::vector<std::pair<RecordPtr, std::string>> records;
        std::size_t missing = 0;
        for (const auto& key : seg.keys) {
            RecordPtr found;
            if (source == Tier::hot) {
                if (const HotObject* obj = tiers.hot.find(key.shard_id, key.sequence))
                    found = obj->records.at(key.sequence - obj->first_sequence);
            } else if (auto one = stream.scan(key.shard_id, key.sequence, key.sequence, now)) {
                found = one->front();
            }
            if (found && found->record_id == key.record_id)
                records.emplace_back(found, key.shard_id);
            else
                ++missing;
        }
        if (missing > 0 || !tiers.cold.rewrite_segment(seg, records)) {
            rep.unrecoverable.push_back(
                {Tier::archive, seg.path, {seg.min_created, seg.max_created + VTime{1}},
                 missing > 0 ? missing : seg.keys.size()});
            continue;
        }
        rep.restored += records.size();
    }
    return rep;
}

} // namespace

RecoveryReport recover_tier(Tier target, Tier source, Interval range, StorageTiers tiers, ShardedStream& stream,
                            VTime now)
{
    if (target == Tier::hot && source == Tier::stream)
        return recover_hot(range, tiers, stream, now);
    if (target == Tier::summary && source == Tier::hot)
        return recover_summary(range, tiers);
    if (target == Tier::archive && (source == Tier::hot || source == Tier::stream))
        return recover_archive(source, range, tiers, stream, now);
    throw std::invalid_argument("recover_tier: cannot rebuild " + to_string(target) + " from " + to_string(source));
}

} // namespace smmon
