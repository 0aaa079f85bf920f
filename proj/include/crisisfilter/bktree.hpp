#pragma once

#include <cstdint>
#include <vector>

#include "crisisfilter/phash.hpp"

namespace crisisfilter {

/// Burkhard-Keller tree over 64-bit hashes under Hamming distance. Values
/// are tagged with a caller-supplied key (the window's sequence number).
///
/// Edges first collect entries in a packed leaf bucket that queries scan
/// linearly; a full bucket turns its oldest entry into a pivot node and
/// redistributes the rest below it. Removing a bucket entry erases it,
/// removing a pivot leaves a tombstone, and the owner decides when to
/// rebuild.
class BkTree {
public:
    struct Hit {
        std::uint64_t key;
        int distance;
    };

    static constexpr std::size_t kBucketCapacity = 256;

    void insert(PerceptualHash h, std::uint64_t key);

    /// Removes the entry holding `key` (whose value must be `h`). Returns
    /// false if no live entry matched.
    bool remove(PerceptualHash h, std::uint64_t key);

    /// All live entries within `radius` of `q`, unordered.
    void radius_query(PerceptualHash q, int radius, std::vector<Hit>& out) const;

    /// Live entry with the smallest distance <= radius, ties to the smallest key.
    bool nearest_within(PerceptualHash q, int radius, Hit& best) const;

    void clear();

    std::size_t live() const { return live_; }
    std::size_t tombstones() const { return dead_; }

private:
    struct Edge {
        std::uint8_t distance;
        bool to_node;         // child node, or else a leaf bucket
        std::uint32_t index;  // into nodes_ or buckets_
    };

    struct Node {
        std::uint64_t hash;
        std::uint64_t key;
        bool alive;
        std::vector<Edge> children;  // sorted by distance
    };

    struct Bucket {
        std::vector<std::uint64_t> hashes;
        std::vector<std::uint64_t> keys;
    };

    void insert_below(std::uint32_t node, std::uint64_t h, std::uint64_t key);
    std::uint32_t new_bucket();

    std::vector<Node> nodes_;
    std::vector<Bucket> buckets_;
    std::vector<std::uint32_t> free_buckets_;
    std::size_t live_ = 0;
    std::size_t dead_ = 0;
};

}  // namespace crisisfilter
