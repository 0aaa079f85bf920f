#include "crisisfilter/hash_window.hpp"

#include <algorithm>
#include <bit>
#include <fstream>

#include "crisisfilter/detail/byteio.hpp"
#include "crisisfilter/detail/popcount.hpp"
#include "crisisfilter/netpbm.hpp"

namespace crisisfilter {

namespace {

// Smallest distance below `bound` in a[0..n), first index on ties. Returns
// `bound` when there is none.
CRISISFILTER_POPCNT_CLONES int scan_nearest(const std::uint64_t* a, std::size_t n, std::uint64_t h, int bound,
                                            std::size_t& index)
{
    for (std::size_t i = 0; i < n; ++i) {
        const int d = std::popcount(a[i] ^ h);
        if (d < bound) {
            bound = d;
            index = i;
        }
    }
    return bound;
}

// Appends (distance, seq0 + i) for every a[i] within `radius`.
CRISISFILTER_POPCNT_CLONES void scan_within(const std::uint64_t* a, std::size_t n, std::uint64_t h, int radius,
                                            std::uint64_t seq0, std::vector<std::pair<int, std::uint64_t>>& hits)
{
    for (std::size_t i = 0; i < n; ++i) {
        const int d = std::popcount(a[i] ^ h);
        if (d <= radius) {
            hits.emplace_back(d, seq0 + i);
        }
    }
}

}  // namespace

std::string_view to_string(DedupEngine e)
{
    return e == DedupEngine::LinearScan ? "linear" : "bktree";
}

std::optional<DedupEngine> parse_engine(std::string_view name)
{
    if (name == "linear" || name == "linear-scan") {
        return DedupEngine::LinearScan;
    }
    if (name == "bktree" || name == "bk-tree") {
        return DedupEngine::BkTree;
    }
    return std::nullopt;
}

void DedupConfig::validate() const
{
    if (threshold_d < 0 || threshold_d > 64) {
        throw std::invalid_argument("threshold_d must be in 0..64");
    }
    if (capacity < 1) {
        throw std::invalid_argument("window capacity must be at least 1");
    }
}

HashWindow::HashWindow(DedupConfig cfg) : cfg_(cfg)
{
    cfg_.validate();
}

DedupDecision HashWindow::check_and_insert(PerceptualHash h, std::string id)
{
    DedupDecision decision;
    if (cfg_.engine == DedupEngine::LinearScan) {
        // The ring holds the oldest entries from ring_head_ onwards. Scanning
        // oldest to newest with a strict '<' keeps the oldest on ties.
        const std::size_t older = ring_.size() - ring_head_;
        std::size_t i = 0;
        std::size_t best_k = 0;
        int best = scan_nearest(ring_.data() + ring_head_, older, h.bits, cfg_.threshold_d + 1, i);
        if (best <= cfg_.threshold_d) {
            best_k = i;
        }
        const int newer = scan_nearest(ring_.data(), ring_head_, h.bits, best, i);
        if (newer < best) {
            best = newer;
            best_k = older + i;
        }
        if (best <= cfg_.threshold_d) {
            decision.verdict = Verdict::Duplicate;
            decision.distance = best;
            decision.matched_id = entries_[best_k].id;
            return decision;
        }
    } else {
        BkTree::Hit hit{};
        if (tree_.nearest_within(h, cfg_.threshold_d, hit)) {
            decision.verdict = Verdict::Duplicate;
            decision.distance = hit.distance;
            decision.matched_id = slot(hit.key).id;
            return decision;
        }
    }
    push(h, std::move(id));
    return decision;
}

std::vector<WindowMatch> HashWindow::query(PerceptualHash h, int radius) const
{
    if (radius > 64) {
        throw std::invalid_argument("query radius must be <= 64");
    }
    std::vector<std::pair<int, std::uint64_t>> hits;  // (distance, seq)
    if (radius >= 0) {
        if (cfg_.engine == DedupEngine::LinearScan) {
            const std::size_t older = ring_.size() - ring_head_;
            scan_within(ring_.data() + ring_head_, older, h.bits, radius, first_seq_, hits);
            scan_within(ring_.data(), ring_head_, h.bits, radius, first_seq_ + older, hits);
        } else {
            std::vector<BkTree::Hit> raw;
            tree_.radius_query(h, radius, raw);
            for (const auto& r : raw) {
                hits.emplace_back(r.distance, r.key);
            }
        }
    }
    std::sort(hits.begin(), hits.end());
    std::vector<WindowMatch> out;
    out.reserve(hits.size());
    for (const auto& [d, seq] : hits) {
        out.push_back({slot(seq).id, d});
    }
    return out;
}

void HashWindow::push(PerceptualHash h, std::string id)
{
    if (entries_.size() == cfg_.capacity) {
        evict_oldest();
    }
    const std::uint64_t seq = first_seq_ + entries_.size();
    entries_.push_back({h, std::move(id)});
    if (cfg_.engine == DedupEngine::LinearScan) {
        if (ring_.size() < cfg_.capacity) {
            ring_.push_back(h.bits);
        } else {
            // Full ring: the slot at head was just vacated by eviction.
            ring_[ring_head_] = h.bits;
            ring_head_ = (ring_head_ + 1) % ring_.size();
        }
    } else {
        tree_.insert(h, seq);
    }
}

void HashWindow::evict_oldest()
{
    const Slot& oldest = entries_.front();
    if (cfg_.engine == DedupEngine::BkTree) {
        tree_.remove(oldest.hash, first_seq_);
    }
    entries_.pop_front();
    ++first_seq_;

    if (cfg_.engine == DedupEngine::BkTree && tree_.tombstones() * 4 > tree_.live()) {
        tree_.clear();
        for (std::size_t k = 0; k < entries_.size(); ++k) {
            tree_.insert(entries_[k].hash, first_seq_ + k);
        }
    }
}

std::vector<WindowEntry> HashWindow::entries() const
{
    std::vector<WindowEntry> out;
    out.reserve(entries_.size());
    for (const auto& s : entries_) {
        out.push_back({s.hash, s.id});
    }
    return out;
}

SnapshotError::SnapshotError(const std::string& what, std::size_t offset)
    : std::runtime_error("snapshot: " + what + " at byte " + std::to_string(offset)), offset_(offset)
{
}

namespace {

constexpr char kMagic[4] = {'C', 'F', 'H', 'W'};
constexpr std::uint8_t kVersion = 1;

using detail::put_le;
using Cursor = detail::ByteCursor<SnapshotError>;

}  // namespace

std::vector<std::uint8_t> encode_snapshot(const HashWindow& w)
{
    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    put_le<std::uint8_t>(out, kVersion);
    put_le<std::uint8_t>(out, static_cast<std::uint8_t>(w.config().threshold_d));
    put_le<std::uint32_t>(out, w.config().capacity);
    const auto entries = w.entries();
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(entries.size()));
    for (const auto& e : entries) {
        if (e.id.size() > UINT16_MAX) {
            throw std::invalid_argument("image id too long for snapshot: " + e.id.substr(0, 32) + "...");
        }
        put_le<std::uint64_t>(out, e.hash.bits);
        put_le<std::uint16_t>(out, static_cast<std::uint16_t>(e.id.size()));
        out.insert(out.end(), e.id.begin(), e.id.end());
    }
    return out;
}

HashWindow decode_snapshot(std::span<const std::uint8_t> bytes, DedupEngine engine)
{
    Cursor in(bytes);
    in.need(4, "magic");
    if (!std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
        throw SnapshotError("bad magic", 0);
    }
    in.get_string(4, "magic");
    const auto version_at = in.pos();
    const auto version = in.get_le<std::uint8_t>("version");
    if (version != kVersion) {
        throw SnapshotError("unsupported version " + std::to_string(version), version_at);
    }
    const auto threshold_at = in.pos();
    const auto threshold = in.get_le<std::uint8_t>("threshold");
    if (threshold > 64) {
        throw SnapshotError("threshold out of range", threshold_at);
    }
    const auto capacity_at = in.pos();
    const auto capacity = in.get_le<std::uint32_t>("capacity");
    if (capacity == 0) {
        throw SnapshotError("zero capacity", capacity_at);
    }
    const auto count_at = in.pos();
    const auto count = in.get_le<std::uint32_t>("count");
    if (count > capacity) {
        throw SnapshotError("count exceeds capacity", count_at);
    }

    HashWindow w(DedupConfig{threshold, capacity, engine});
    for (std::uint32_t i = 0; i < count; ++i) {
        const auto hash = in.get_le<std::uint64_t>("record hash");
        const auto len = in.get_le<std::uint16_t>("record id length");
        w.push(PerceptualHash{hash}, in.get_string(len, "record id"));
    }
    if (in.remaining() != 0) {
        throw SnapshotError("trailing bytes", in.pos());
    }
    return w;
}

void save_snapshot(const HashWindow& w, const std::filesystem::path& path)
{
    const auto bytes = encode_snapshot(w);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write snapshot " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

HashWindow load_snapshot(const std::filesystem::path& path, DedupEngine engine)
{
    return decode_snapshot(read_file_bytes(path), engine);
}

}  // namespace crisisfilter
