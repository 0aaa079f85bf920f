#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "crisisfilter/bktree.hpp"
#include "crisisfilter/phash.hpp"

namespace crisisfilter {

enum class DedupEngine { LinearScan, BkTree };

std::string_view to_string(DedupEngine e);
std::optional<DedupEngine> parse_engine(std::string_view name);

struct DedupConfig {
    int threshold_d = 10;
    std::uint32_t capacity = 100'000;
    DedupEngine engine = DedupEngine::LinearScan;

    void validate() const;
};

enum class Verdict { Distinct, Duplicate };

struct DedupDecision {
    Verdict verdict = Verdict::Distinct;
    std::string matched_id;  // set iff Duplicate
    int distance = -1;       // set iff Duplicate

    bool duplicate() const { return verdict == Verdict::Duplicate; }
    friend bool operator==(const DedupDecision&, const DedupDecision&) = default;
};

struct WindowMatch {
    std::string id;
    int distance;
    friend bool operator==(const WindowMatch&, const WindowMatch&) = default;
};

struct WindowEntry {
    PerceptualHash hash;
    std::string id;
    friend bool operator==(const WindowEntry&, const WindowEntry&) = default;
};

/// Bounded FIFO of recently seen distinct hashes with Hamming-radius lookup.
///
/// Mutation must be serialized by the owner. Concurrent `query` calls are
/// safe only while no thread mutates the window.
class HashWindow {
public:
    explicit HashWindow(DedupConfig cfg = {});

    /// Duplicate (closest match, oldest on ties) when any stored hash is
    /// within threshold_d; the hash is then not stored. Otherwise Distinct,
    /// and the hash is appended, evicting the oldest entry at capacity.
    DedupDecision check_and_insert(PerceptualHash h, std::string id);

    /// Entries within `radius`, ascending by distance then insertion order.
    std::vector<WindowMatch> query(PerceptualHash h, int radius) const;

    /// Appends without checking for duplicates (used by restore).
    void push(PerceptualHash h, std::string id);

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }
    const DedupConfig& config() const { return cfg_; }
    std::vector<WindowEntry> entries() const;

private:
    struct Slot {
        PerceptualHash hash;
        std::string id;
    };

    void evict_oldest();
    const Slot& slot(std::uint64_t seq) const { return entries_[seq - first_seq_]; }

    DedupConfig cfg_;
    std::deque<Slot> entries_;
    std::uint64_t first_seq_ = 0;  // sequence number of entries_.front()

    // Linear engine: ring buffer parallel to entries_, packed for scanning.
    std::vector<std::uint64_t> ring_;
    std::size_t ring_head_ = 0;

    BkTree tree_;
};

/// Snapshot format: "CFHW", u8 version (1), u8 threshold, u32 capacity,
/// u32 count, then count x (u64 hash, u16 id length, id bytes); integers
/// little-endian, entries oldest first.
class SnapshotError : public std::runtime_error {
public:
    SnapshotError(const std::string& what, std::size_t offset);
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

std::vector<std::uint8_t> encode_snapshot(const HashWindow& w);
HashWindow decode_snapshot(std::span<const std::uint8_t> bytes, DedupEngine engine = DedupEngine::LinearScan);

void save_snapshot(const HashWindow& w, const std::filesystem::path& path);
HashWindow load_snapshot(const std::filesystem::path& path, DedupEngine engine = DedupEngine::LinearScan);

}  // namespace crisisfilter
