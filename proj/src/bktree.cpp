#include "crisisfilter/bktree.hpp"

#include <algorithm>
#include <bit>

#include "crisisfilter/detail/popcount.hpp"

namespace crisisfilter {

namespace {

CRISISFILTER_POPCNT_CLONES void scan_radius(const std::uint64_t* hashes, const std::uint64_t* keys, std::size_t n,
                                            std::uint64_t q, int radius, std::vector<BkTree::Hit>& out)
{
    for (std::size_t i = 0; i < n; ++i) {
        const int d = std::popcount(hashes[i] ^ q);
        if (d <= radius) {
            out.push_back({keys[i], d});
        }
    }
}

// Tightens (found, best, bound) with the bucket's entries.
CRISISFILTER_POPCNT_CLONES void scan_nearest(const std::uint64_t* hashes, const std::uint64_t* keys, std::size_t n,
                                             std::uint64_t q, int& bound, bool& found, BkTree::Hit& best)
{
    for (std::size_t i = 0; i < n; ++i) {
        const int d = std::popcount(hashes[i] ^ q);
        if (d <= bound && (!found || d < best.distance || keys[i] < best.key)) {
            best = {keys[i], d};
            found = true;
            bound = d;
        }
    }
}

auto find_edge(auto& children, std::uint8_t d)
{
    return std::lower_bound(children.begin(), children.end(), d,
                            [](const auto& edge, std::uint8_t v) { return edge.distance < v; });
}

}  // namespace

std::uint32_t BkTree::new_bucket()
{
    if (!free_buckets_.empty()) {
        const auto b = free_buckets_.back();
        free_buckets_.pop_back();
        return b;
    }
    buckets_.emplace_back();
    return static_cast<std::uint32_t>(buckets_.size() - 1);
}

void BkTree::insert(PerceptualHash h, std::uint64_t key)
{
    ++live_;
    if (nodes_.empty()) {
        nodes_.push_back(Node{h.bits, key, true, {}});
        return;
    }
    insert_below(0, h.bits, key);
}

void BkTree::insert_below(std::uint32_t cur, std::uint64_t h, std::uint64_t key)
{
    for (;;) {
        const auto d = static_cast<std::uint8_t>(std::popcount(nodes_[cur].hash ^ h));
        auto& kids = nodes_[cur].children;
        auto it = find_edge(kids, d);
        if (it == kids.end() || it->distance != d) {
            const auto b = new_bucket();
            buckets_[b].hashes.push_back(h);
            buckets_[b].keys.push_back(key);
            kids.insert(it, Edge{d, false, b});
            return;
        }
        if (it->to_node) {
            cur = it->index;
            continue;
        }
        const auto b = it->index;
        if (buckets_[b].hashes.size() < kBucketCapacity) {
            buckets_[b].hashes.push_back(h);
            buckets_[b].keys.push_back(key);
            return;
        }
        // Full bucket: its first entry becomes a pivot and the others,
        // plus the new one, are placed below it.
        Bucket full = std::move(buckets_[b]);
        buckets_[b] = Bucket{};
        free_buckets_.push_back(b);
        const auto pivot = static_cast<std::uint32_t>(nodes_.size());
        *it = Edge{d, true, pivot};
        nodes_.push_back(Node{full.hashes[0], full.keys[0], true, {}});
        for (std::size_t i = 1; i < full.hashes.size(); ++i) {
            insert_below(pivot, full.hashes[i], full.keys[i]);
        }
        cur = pivot;
    }
}

bool BkTree::remove(PerceptualHash h, std::uint64_t key)
{
    if (nodes_.empty()) {
        return false;
    }
    // Every entry holding value h sits on the path an insertion of h takes.
    std::uint32_t cur = 0;
    for (;;) {
        Node& node = nodes_[cur];
        const auto d = static_cast<std::uint8_t>(std::popcount(node.hash ^ h.bits));
        if (d == 0 && node.key == key && node.alive) {
            node.alive = false;
            --live_;
            ++dead_;
            return true;
        }
        auto it = find_edge(node.children, d);
        if (it == node.children.end() || it->distance != d) {
            return false;
        }
        if (it->to_node) {
            cur = it->index;
            continue;
        }
        Bucket& b = buckets_[it->index];
        for (std::size_t i = 0; i < b.keys.size(); ++i) {
            if (b.keys[i] == key && b.hashes[i] == h.bits) {
                b.keys[i] = b.keys.back();
                b.hashes[i] = b.hashes.back();
                b.keys.pop_back();
                b.hashes.pop_back();
                --live_;
                return true;
            }
        }
        return false;
    }
}

void BkTree::radius_query(PerceptualHash q, int radius, std::vector<Hit>& out) const
{
    if (nodes_.empty()) {
        return;
    }
    std::vector<std::uint32_t> stack{0};
    while (!stack.empty()) {
        const Node& node = nodes_[stack.back()];
        stack.pop_back();
        const int d = std::popcount(node.hash ^ q.bits);
        if (node.alive && d <= radius) {
            out.push_back({node.key, d});
        }
        const int lo = d - radius;
        const int hi = d + radius;
        for (const auto& edge : node.children) {
            if (edge.distance > hi) {
                break;
            }
            if (edge.distance < lo) {
                continue;
            }
            if (edge.to_node) {
                stack.push_back(edge.index);
            } else {
                const Bucket& b = buckets_[edge.index];
                scan_radius(b.hashes.data(), b.keys.data(), b.hashes.size(), q.bits, radius, out);
            }
        }
    }
}

bool BkTree::nearest_within(PerceptualHash q, int radius, Hit& best) const
{
    if (nodes_.empty()) {
        return false;
    }
    bool found = false;
    int bound = radius;
    std::vector<std::uint32_t> stack{0};
    while (!stack.empty()) {
        const Node& node = nodes_[stack.back()];
        stack.pop_back();
        const int d = std::popcount(node.hash ^ q.bits);
        if (node.alive && d <= bound && (!found || d < best.distance || node.key < best.key)) {
            best = {node.key, d};
            found = true;
            bound = d;
        }
        for (const auto& edge : node.children) {
            if (edge.distance > d + bound) {
                break;
            }
            if (edge.distance < d - bound) {
                continue;
            }
            if (edge.to_node) {
                stack.push_back(edge.index);
            } else {
                const Bucket& b = buckets_[edge.index];
                scan_nearest(b.hashes.data(), b.keys.data(), b.hashes.size(), q.bits, bound, found, best);
            }
        }
    }
    return found;
}

void BkTree::clear()
{
    nodes_.clear();
    buckets_.clear();
    free_buckets_.clear();
    live_ = 0;
    dead_ = 0;
}

}  // namespace crisisfilter
