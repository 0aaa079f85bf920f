#include <doctest.h>

#include <algorithm>
#include <bit>
#include <filesystem>

#include "crisisfilter/hash_window.hpp"
#include "crisisfilter/rng.hpp"
#include "crisisfilter/threshold.hpp"

using namespace crisisfilter;

namespace {

PerceptualHash flip(PerceptualHash h, Rng& rng, int bits)
{
    for (int i = 0; i < bits; ++i) {
        h.bits ^= std::uint64_t{1} << rng.below(64);
    }
    return h;
}

// Random stream mixing fresh hashes with near copies of earlier ones.
std::vector<PerceptualHash> mixed_stream(std::uint64_t seed, int n)
{
    Rng rng(seed);
    std::vector<PerceptualHash> out;
    for (int i = 0; i < n; ++i) {
        if (!out.empty() && rng.bernoulli(0.4)) {
            out.push_back(flip(out[rng.below(out.size())], rng, rng.uniform_int(0, 14)));
        } else {
            out.push_back(PerceptualHash{rng.next()});
        }
    }
    return out;
}

// Linear reference: the minimum over a plain vector, oldest first.
std::vector<WindowMatch> brute_query(const std::vector<WindowEntry>& entries, PerceptualHash h, int radius)
{
    std::vector<std::pair<int, std::size_t>> hits;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const int d = hamming(entries[i].hash, h);
        if (d <= radius) {
            hits.emplace_back(d, i);
        }
    }
    std::sort(hits.begin(), hits.end());
    std::vector<WindowMatch> out;
    for (auto [d, i] : hits) {
        out.push_back({entries[i].id, d});
    }
    return out;
}

}  // namespace

TEST_CASE("check_and_insert basics")
{
    for (auto engine : {DedupEngine::LinearScan, DedupEngine::BkTree}) {
        CAPTURE(to_string(engine));
        HashWindow w({10, 100, engine});
        const PerceptualHash h{0xdeadbeefcafef00dULL};
        auto d = w.check_and_insert(h, "a");
        CHECK(d.verdict == Verdict::Distinct);
        CHECK(w.size() == 1);

        d = w.check_and_insert(h, "b");
        CHECK(d.verdict == Verdict::Duplicate);
        CHECK(d.distance == 0);
        CHECK(d.matched_id == "a");
        CHECK(w.size() == 1);

        // Exactly at the threshold still counts as duplicate.
        d = w.check_and_insert(PerceptualHash{h.bits ^ 0x3ffULL}, "c");
        CHECK(d.duplicate());
        CHECK(d.distance == 10);
        d = w.check_and_insert(PerceptualHash{h.bits ^ 0x7ffULL}, "e");
        CHECK_FALSE(d.duplicate());
    }
}

TEST_CASE("FIFO eviction")
{
    for (auto engine : {DedupEngine::LinearScan, DedupEngine::BkTree}) {
        HashWindow w({3, 3, engine});
        const std::uint64_t base[] = {0x0ULL, 0xffffULL << 16, 0xffffULL << 32, 0xffffULL << 48};
        for (int i = 0; i < 4; ++i) {
            CHECK_FALSE(w.check_and_insert(PerceptualHash{base[i]}, "h" + std::to_string(i + 1)).duplicate());
        }
        CHECK(w.size() == 3);
        CHECK(w.entries().front().id == "h2");
        // h1 was evicted, so it is distinct again.
        CHECK_FALSE(w.check_and_insert(PerceptualHash{base[0]}, "h1-again").duplicate());
        CHECK(w.entries().back().id == "h1-again");
        CHECK(w.entries().front().id == "h3");
    }
}

TEST_CASE("ties go to the oldest entry")
{
    for (auto engine : {DedupEngine::LinearScan, DedupEngine::BkTree}) {
        HashWindow w({2, 10, engine});
        w.push(PerceptualHash{0b0001}, "old");
        w.push(PerceptualHash{0b0010}, "new");
        const auto d = w.check_and_insert(PerceptualHash{0b0000}, "q");
        CHECK(d.matched_id == "old");
        CHECK(d.distance == 1);
        const auto hits = w.query(PerceptualHash{0}, 1);
        REQUIRE(hits.size() == 2);
        CHECK(hits[0].id == "old");
        CHECK(hits[1].id == "new");
    }
}

TEST_CASE("query")
{
    HashWindow empty;
    CHECK(empty.query(PerceptualHash{5}, 64).empty());

    HashWindow one;
    one.push(PerceptualHash{42}, "x");
    CHECK(one.query(PerceptualHash{42}, 0) == std::vector<WindowMatch>{{"x", 0}});
    CHECK_THROWS_AS(one.query(PerceptualHash{42}, 65), std::invalid_argument);

    // Linear scan is the oracle for the tree.
    HashWindow lin({10, 5000, DedupEngine::LinearScan});
    HashWindow bk({10, 5000, DedupEngine::BkTree});
    Rng rng(1);
    const auto stream = mixed_stream(5, 1000);
    for (std::size_t i = 0; i < stream.size(); ++i) {
        lin.push(stream[i], std::to_string(i));
        bk.push(stream[i], std::to_string(i));
    }
    for (int q = 0; q < 200; ++q) {
        const PerceptualHash probe = q % 2 ? stream[rng.below(stream.size())] : PerceptualHash{rng.next()};
        const auto expected = brute_query(lin.entries(), probe, 10);
        CHECK(lin.query(probe, 10) == expected);
        CHECK(bk.query(probe, 10) == expected);
    }
}

TEST_CASE("bk-tree buckets split and shrink correctly")
{
    // Few distinct values with many copies force repeated bucket splits,
    // including splits along zero-distance edges.
    Rng rng(12);
    std::vector<std::uint64_t> values(8);
    for (auto& v : values) {
        v = rng.next();
    }
    BkTree tree;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> live;  // (hash, key)
    for (std::uint64_t key = 0; key < 6000; ++key) {
        const std::uint64_t h = rng.bernoulli(0.5) ? values[rng.below(values.size())] : rng.next();
        tree.insert(PerceptualHash{h}, key);
        live.emplace_back(h, key);
    }
    // Remove every third entry, then a missing one.
    std::vector<std::pair<std::uint64_t, std::uint64_t>> kept;
    for (std::size_t i = 0; i < live.size(); ++i) {
        if (i % 3 == 0) {
            REQUIRE(tree.remove(PerceptualHash{live[i].first}, live[i].second));
        } else {
            kept.push_back(live[i]);
        }
    }
    CHECK_FALSE(tree.remove(PerceptualHash{live[0].first}, live[0].second));
    CHECK(tree.live() == kept.size());

    for (int q = 0; q < 100; ++q) {
        const PerceptualHash probe{q % 2 ? values[rng.below(values.size())] : rng.next()};
        const int radius = static_cast<int>(rng.below(30));
        std::vector<std::pair<std::uint64_t, int>> expected;
        for (const auto& [h, key] : kept) {
            const int d = std::popcount(h ^ probe.bits);
            if (d <= radius) {
                expected.emplace_back(key, d);
            }
        }
        std::vector<BkTree::Hit> hits;
        tree.radius_query(probe, radius, hits);
        std::vector<std::pair<std::uint64_t, int>> got;
        for (const auto& h : hits) {
            got.emplace_back(h.key, h.distance);
        }
        std::sort(got.begin(), got.end());
        CHECK(got == expected);

        BkTree::Hit best{};
        const bool found = tree.nearest_within(probe, radius, best);
        REQUIRE(found == !expected.empty());
        if (found) {
            auto want = *std::min_element(expected.begin(), expected.end(), [](const auto& a, const auto& b) {
                return std::pair(a.second, a.first) < std::pair(b.second, b.first);
            });
            CHECK(best.key == want.first);
            CHECK(best.distance == want.second);
        }
    }
}

TEST_CASE("engine equivalence on long streams")
{
    for (std::uint32_t capacity : {1u, 10u, 1000u}) {
        CAPTURE(capacity);
        HashWindow lin({10, capacity, DedupEngine::LinearScan});
        HashWindow bk({10, capacity, DedupEngine::BkTree});
        const auto stream = mixed_stream(capacity, 10000);
        for (std::size_t i = 0; i < stream.size(); ++i) {
            const auto a = lin.check_and_insert(stream[i], std::to_string(i));
            const auto b = bk.check_and_insert(stream[i], std::to_string(i));
            REQUIRE(a == b);
            REQUIRE(lin.size() <= capacity);
        }
        CHECK(lin.entries() == bk.entries());
    }
}

TEST_CASE("window keeps exactly the last capacity distinct hashes")
{
    HashWindow w({0, 50});
    for (int i = 0; i < 120; ++i) {
        w.check_and_insert(PerceptualHash{static_cast<std::uint64_t>(i) * 0x9e3779b97f4a7c15ULL}, std::to_string(i));
    }
    const auto entries = w.entries();
    REQUIRE(entries.size() == 50);
    for (int k = 0; k < 50; ++k) {
        CHECK(entries[k].id == std::to_string(70 + k));
    }
}

TEST_CASE("replaying a stream marks every element duplicate")
{
    const auto stream = mixed_stream(77, 500);
    for (auto engine : {DedupEngine::LinearScan, DedupEngine::BkTree}) {
        HashWindow w({10, 1000, engine});
        for (std::size_t i = 0; i < stream.size(); ++i) {
            w.check_and_insert(stream[i], "a" + std::to_string(i));
        }
        const auto stored = w.size();
        for (std::size_t i = 0; i < stream.size(); ++i) {
            CHECK(w.check_and_insert(stream[i], "b" + std::to_string(i)).duplicate());
        }
        CHECK(w.size() == stored);
    }
}

TEST_CASE("config validation")
{
    CHECK_THROWS_AS(HashWindow({65, 10}), std::invalid_argument);
    CHECK_THROWS_AS(HashWindow({-1, 10}), std::invalid_argument);
    CHECK_THROWS_AS(HashWindow({10, 0}), std::invalid_argument);
    CHECK(parse_engine("bk-tree") == DedupEngine::BkTree);
    CHECK(parse_engine("linear") == DedupEngine::LinearScan);
    CHECK_FALSE(parse_engine("lsh").has_value());
}

TEST_CASE("snapshot layout and round trip")
{
    HashWindow w({7, 300});
    w.push(PerceptualHash{0x0102030405060708ULL}, "ab");
    const auto bytes = encode_snapshot(w);
    const std::vector<std::uint8_t> expected{'C', 'F', 'H', 'W', 1, 7, 0x2c, 0x01, 0, 0, 1, 0, 0, 0,
                                             0x08, 0x07, 0x06, 0x05, 0x04, 0x03, 0x02, 0x01, 2, 0, 'a', 'b'};
    CHECK(bytes == expected);

    SUBCASE("empty window")
    {
        const auto restored = decode_snapshot(encode_snapshot(HashWindow{}));
        CHECK(restored.size() == 0);
        CHECK(restored.config().capacity == 100000);
        CHECK(restored.config().threshold_d == 10);
    }
    SUBCASE("restored window gives identical verdicts")
    {
        HashWindow src({10, 2000});
        const auto stream = mixed_stream(3, 3000);
        for (std::size_t i = 0; i < 1500; ++i) {
            src.check_and_insert(stream[i], "s" + std::to_string(i));
        }
        const auto blob = encode_snapshot(src);
        auto restored = decode_snapshot(blob, DedupEngine::BkTree);
        CHECK(encode_snapshot(restored) == blob);
        for (std::size_t i = 1500; i < stream.size(); ++i) {
            CHECK(src.check_and_insert(stream[i], "p") == restored.check_and_insert(stream[i], "p"));
        }
    }
    SUBCASE("100k entries through a file")
    {
        HashWindow big({10, 100000});
        Rng rng(8);
        for (int i = 0; i < 100000; ++i) {
            big.push(PerceptualHash{rng.next()}, "img-" + std::to_string(i));
        }
        const auto path = std::filesystem::temp_directory_path() / "crisisfilter_test_window.cfhw";
        save_snapshot(big, path);
        const auto restored = load_snapshot(path);
        CHECK(restored.entries() == big.entries());
        std::filesystem::remove(path);
    }
}

TEST_CASE("corrupt snapshots are rejected with a position")
{
    HashWindow w({10, 10});
    w.push(PerceptualHash{1}, "one");
    const auto good = encode_snapshot(w);

    auto bad_magic = good;
    bad_magic[0] = 'X';
    CHECK_THROWS_AS(decode_snapshot(bad_magic), SnapshotError);

    auto bad_version = good;
    bad_version[4] = 2;
    try {
        decode_snapshot(bad_version);
        FAIL("expected failure");
    } catch (const SnapshotError& e) {
        CHECK(e.offset() == 4);
    }

    auto truncated = good;
    truncated.pop_back();
    try {
        decode_snapshot(truncated);
        FAIL("expected failure");
    } catch (const SnapshotError& e) {
        CHECK(e.offset() == 24);
    }

    auto trailing = good;
    trailing.push_back(0);
    CHECK_THROWS_AS(decode_snapshot(trailing), SnapshotError);

    auto overfull = good;
    overfull[6] = 0;  // capacity 0
    CHECK_THROWS_AS(decode_snapshot(overfull), SnapshotError);
}

TEST_CASE("tune_threshold")
{
    SUBCASE("all identical pairs")
    {
        const std::vector<AnnotatedPair> pairs(20, {0, true});
        const auto r = tune_threshold(pairs, 3, 9);
        CHECK(r.best_d == 3);
        CHECK(r.curve.size() == 7);
        for (const auto& p : r.curve) {
            CHECK(p.accuracy == 1.0);
        }
    }
    SUBCASE("planted separation at 7")
    {
        std::vector<AnnotatedPair> pairs;
        for (int d = 0; d <= 20; ++d) {
            pairs.push_back({d, d <= 7});
            pairs.push_back({d, d <= 7});
        }
        const auto r = tune_threshold(pairs, 0, 20);
        CHECK(r.best_d == 7);
        CHECK(r.curve[7].accuracy == 1.0);
        CHECK(r.curve[6].accuracy < 1.0);
    }
    SUBCASE("noisy overlap around 10 matches brute-force counting")
    {
        // Same pairs concentrate below 10, different ones above, with a
        // planted overlap band.
        Rng rng(2024);
        std::vector<AnnotatedPair> pairs;
        for (int i = 0; i < 1100; ++i) {
            const bool same = rng.bernoulli(0.5);
            int d = same ? rng.uniform_int(0, 10) : rng.uniform_int(11, 20);
            if (rng.bernoulli(0.05)) {
                d = same ? rng.uniform_int(11, 13) : rng.uniform_int(8, 10);
            }
            pairs.push_back({d, same});
        }
        const auto r = tune_threshold(pairs, 0, 20);
        int brute_best = -1;
        double brute_acc = -1;
        for (int d = 0; d <= 20; ++d) {
            int correct = 0;
            for (const auto& p : pairs) {
                correct += (p.distance <= d) == p.is_same;
            }
            const double acc = correct / 1100.0;
            CHECK(r.curve[d].accuracy == acc);
            if (acc > brute_acc) {
                brute_acc = acc;
                brute_best = d;
            }
        }
        CHECK(r.best_d == brute_best);
        CHECK(r.best_d == 10);
        CHECK(r.curve[15].accuracy < r.curve[10].accuracy);
    }
    CHECK_THROWS_AS(tune_threshold({}, 0, 20), std::invalid_argument);
    const std::vector<AnnotatedPair> one{{3, true}};
    CHECK_THROWS_AS(tune_threshold(one, 5, 4), std::invalid_argument);
    CHECK_THROWS_AS(tune_threshold(one, 0, 65), std::invalid_argument);
}
