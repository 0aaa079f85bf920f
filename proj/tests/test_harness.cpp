#include <doctest.h>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <set>

#include "crisisfilter/corpus.hpp"
#include "crisisfilter/dataset.hpp"
#include "crisisfilter/experiments.hpp"
#include "crisisfilter/features.hpp"
#include "crisisfilter/netpbm.hpp"
#include "crisisfilter/phash.hpp"
#include "crisisfilter/pipeline.hpp"
#include "crisisfilter/rng.hpp"

using namespace crisisfilter;

namespace {

std::uint64_t fnv1a(std::uint64_t h, const void* data, std::size_t n)
{
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h = (h ^ p[i]) * 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t corpus_fingerprint(const Corpus& c)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& r : c.records) {
        const auto line = record_to_json(r).dump();
        h = fnv1a(h, line.data(), line.size());
        h = fnv1a(h, r.payload.data(), r.payload.size());
    }
    return h;
}

PerceptualHash payload_hash(const ImageRecord& r)
{
    return phash(decode_netpbm(r.payload));
}

Raster resize_rgb(const Raster& img, double f)
{
    const int w = static_cast<int>(std::lround(img.width() * f));
    const int h = static_cast<int>(std::lround(img.height() * f));
    Raster out(w, h, img.channels());
    for (int ch = 0; ch < img.channels(); ++ch) {
        LumaPlane p(img.width(), img.height());
        for (int y = 0; y < img.height(); ++y) {
            for (int x = 0; x < img.width(); ++x) {
                p.at(x, y) = img.at(x, y, ch);
            }
        }
        const auto r = resize_area(p, w, h);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                out.at(x, y, ch) = static_cast<std::uint8_t>(std::lround(std::clamp(r.at(x, y), 0.0, 255.0)));
            }
        }
    }
    return out;
}

Raster brightness(const Raster& img, double f)
{
    Raster out = img;
    for (auto& v : out.data()) {
        v = static_cast<std::uint8_t>(std::lround(std::clamp(v * f, 0.0, 255.0)));
    }
    return out;
}

// Removes round(frac * size) rows and columns in total, split between the
// opposite borders.
Raster border_crop(const Raster& img, double frac)
{
    const int cx = static_cast<int>(std::lround(img.width() * frac));
    const int cy = static_cast<int>(std::lround(img.height() * frac));
    Raster out(img.width() - cx, img.height() - cy, img.channels());
    for (int y = 0; y < out.height(); ++y) {
        for (int x = 0; x < out.width(); ++x) {
            for (int ch = 0; ch < img.channels(); ++ch) {
                out.at(x, y, ch) = img.at(x + cx / 2, y + cy / 2, ch);
            }
        }
    }
    return out;
}

// White strip one sixteenth of the height along the bottom, with dark
// glyph-like blocks.
Raster text_band(const Raster& img)
{
    Raster out = img;
    const int band = std::max(3, img.height() / 16);
    for (int y = img.height() - band; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            const bool ink = y > img.height() - band + 1 && y < img.height() - 1 && (x / 2) % 3 != 2;
            for (int ch = 0; ch < img.channels(); ++ch) {
                out.at(x, y, ch) = ink ? 20 : 245;
            }
        }
    }
    return out;
}

}  // namespace

TEST_CASE("generator examples")
{
    SUBCASE("duplicate_rate 0 makes every image its own group")
    {
        CorpusSpec s;
        s.seed = 3;
        s.n_severe = 20;
        s.n_mild = 20;
        s.n_none = 20;
        s.n_irrelevant = 20;
        s.duplicate_rate = 0.0;
        const auto c = generate_corpus(s);
        REQUIRE(c.records.size() == 80);
        std::set<std::string> groups;
        for (std::size_t i = 0; i < c.records.size(); ++i) {
            CHECK(c.truth[i].original);
            groups.insert(c.truth[i].group);
            CHECK(c.records[i].dup_group == c.truth[i].group);
        }
        CHECK(groups.size() == 80);
    }
    SUBCASE("n_irrelevant 0 makes every record relevant")
    {
        CorpusSpec s;
        s.seed = 4;
        s.n_severe = 30;
        s.n_mild = 20;
        s.n_none = 30;
        s.n_irrelevant = 0;
        const auto c = generate_corpus(s);
        REQUIRE_FALSE(c.records.empty());
        for (const auto& r : c.records) {
            CHECK(r.relevance == Relevance::Relevant);
        }
    }
    SUBCASE("counts follow the spec")
    {
        CorpusSpec s;
        s.seed = 5;
        s.n_severe = 40;
        s.n_mild = 30;
        s.n_none = 20;
        s.n_irrelevant = 10;
        s.duplicate_rate = 0.2;
        s.n_truncated = 3;
        s.n_missing = 2;
        const auto c = generate_corpus(s);
        CHECK(c.records.size() == 100 + 25 + 5);
        long long originals = 0, truncated = 0, missing = 0;
        for (std::size_t i = 0; i < c.records.size(); ++i) {
            originals += c.truth[i].original && c.truth[i].corruption == Corruption::None;
            truncated += c.truth[i].corruption == Corruption::Truncated;
            missing += c.truth[i].corruption == Corruption::Missing;
            if (c.truth[i].corruption == Corruption::Missing) {
                CHECK(c.records[i].payload.empty());
            }
        }
        CHECK(originals == 100);
        CHECK(truncated == 3);
        CHECK(missing == 2);
    }
    SUBCASE("invalid specs are rejected")
    {
        CorpusSpec s;
        s.duplicate_rate = 1.0;
        CHECK_THROWS_AS(generate_corpus(s), std::invalid_argument);
        s = CorpusSpec{};
        s.n_mild = -1;
        CHECK_THROWS_AS(generate_corpus(s), std::invalid_argument);
        CHECK_THROWS_AS(corpus_spec_from_json(nlohmann::json{{"seeds", 1}}), std::invalid_argument);
        CHECK_THROWS_AS(corpus_spec_from_json(nlohmann::json{{"perturbations", {"smudge"}}}), std::invalid_argument);
    }
}

TEST_CASE("spec JSON round trip")
{
    CorpusSpec s;
    s.seed = 99;
    s.n_mild = 7;
    s.duplicate_rate = 0.25;
    s.perturbations = {Perturbation::Blur, Perturbation::Crop};
    const auto back = corpus_spec_from_json(to_json(s));
    CHECK(to_json(back) == to_json(s));
    CHECK(back.perturbations == s.perturbations);
}

TEST_CASE("golden corpus for seed 7")
{
    CorpusSpec s;
    s.seed = 7;
    s.n_severe = 200;
    s.n_mild = 100;
    s.n_none = 300;
    s.n_irrelevant = 200;
    s.duplicate_rate = 0.4;
    const auto a = generate_corpus(s);
    const auto b = generate_corpus(s);
    CHECK(a.records.size() == 1333);
    CHECK(a.violations == 0);
    CHECK(corpus_fingerprint(a) == corpus_fingerprint(b));
    CHECK(corpus_fingerprint(a) == 0xb3baf71a30296c32ULL);

    // Planted structure: duplicates within the threshold of their source and
    // farther from every other distinct image; distinct images pairwise apart.
    std::vector<std::size_t> originals;
    std::vector<PerceptualHash> hashes;
    for (const auto& r : a.records) {
        hashes.push_back(payload_hash(r));
    }
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        if (a.truth[i].original) {
            originals.push_back(i);
        }
    }
    CHECK(originals.size() == 800);
    int min_distinct = 64;
    for (std::size_t x = 0; x < originals.size(); ++x) {
        for (std::size_t y = x + 1; y < originals.size(); ++y) {
            min_distinct = std::min(min_distinct, hamming(hashes[originals[x]], hashes[originals[y]]));
        }
    }
    CHECK(min_distinct > s.threshold_d);
    for (std::size_t i = 0; i < a.records.size(); ++i) {
        const auto& t = a.truth[i];
        if (t.original) {
            continue;
        }
        REQUIRE(t.source >= 0);
        REQUIRE(static_cast<std::size_t>(t.source) < i);
        CHECK(a.truth[t.source].group == t.group);
        const int d = hamming(hashes[i], hashes[t.source]);
        CHECK(d == t.distance);
        CHECK(d <= s.threshold_d);
        for (auto o : originals) {
            if (o != static_cast<std::size_t>(t.source)) {
                CHECK(hamming(hashes[i], hashes[o]) > s.threshold_d);
            }
        }
    }
}

TEST_CASE("write and load round trip")
{
    CorpusSpec s;
    s.seed = 11;
    s.n_severe = 15;
    s.n_mild = 10;
    s.n_none = 15;
    s.n_irrelevant = 10;
    s.n_truncated = 2;
    s.n_missing = 2;
    const auto c = generate_corpus(s);
    const auto dir = std::filesystem::temp_directory_path() / "crisisfilter_test_corpus";
    std::filesystem::remove_all(dir);
    write_corpus(c, dir);
    const auto back = load_corpus(dir / "manifest.jsonl");
    REQUIRE(back.records.size() == c.records.size());
    CHECK(to_json(back.spec) == to_json(c.spec));
    for (std::size_t i = 0; i < c.records.size(); ++i) {
        const auto& a = c.records[i];
        const auto& b = back.records[i];
        CHECK(a.id == b.id);
        CHECK(a.damage == b.damage);
        CHECK(a.relevance == b.relevance);
        CHECK(a.object_tags == b.object_tags);
        CHECK(a.dup_group == b.dup_group);
        CHECK(a.payload == b.payload);
        if (c.truth[i].corruption == Corruption::None) {
            CHECK(back.truth[i].group == c.truth[i].group);
            CHECK(back.truth[i].original == c.truth[i].original);
        }
    }
    std::filesystem::remove_all(dir);
}

TEST_CASE("pipeline reproduces expected retention with a faithful relevancy model")
{
    CorpusSpec s;
    s.seed = 21;
    s.n_severe = 40;
    s.n_mild = 30;
    s.n_none = 50;
    s.n_irrelevant = 0;
    s.n_truncated = 4;
    s.n_missing = 3;
    const auto c = generate_corpus(s);
    REQUIRE(c.violations == 0);

    // Every usable record is relevant, so a constant scorer agrees with the labels.
    ClassifierModel model;
    model.classes = relevance_classes();
    model.dim = kFeatureDim;
    model.mean.assign(kFeatureDim, 0.0);
    model.scale.assign(kFeatureDim, 1.0);
    model.weights.assign(2 * (kFeatureDim + 1), 0.0);
    model.weights[1 * (kFeatureDim + 1) + kFeatureDim] = 5.0;

    struct MemoryFetcher : Fetcher {
        const Corpus* corpus;
        FetchResult fetch(const std::string& url) const override
        {
            for (std::size_t i = 0; i < corpus->records.size(); ++i) {
                if (corpus->records[i].url == url) {
                    if (corpus->truth[i].corruption == Corruption::Missing) {
                        return {false, {}, "missing"};
                    }
                    return {true, corpus->records[i].payload, {}};
                }
            }
            return {false, {}, "unknown"};
        }
    } fetcher;
    fetcher.corpus = &c;

    auto records = c.records;
    for (auto& r : records) {
        r.payload.clear();
    }
    HashWindow window(DedupConfig{});
    const auto result = run_pipeline(records, &model, window, fetcher, PipelineConfig{});
    const auto expected = expected_retention(c);
    REQUIRE(result.report.rows.size() == expected.size());
    for (std::size_t k = 0; k < expected.size(); ++k) {
        const auto& row = result.report.rows[k];
        CAPTURE(expected[k].category);
        CHECK(row.category == expected[k].category);
        CHECK(row.raw == expected[k].raw);
        CHECK(row.fetch_failed == expected[k].fetch_failed);
        CHECK(row.decode_failed == expected[k].decode_failed);
        CHECK(row.after_relevancy == expected[k].after_relevancy);
        CHECK(row.after_dedup == expected[k].after_dedup);
    }
    std::set<std::string> kept;
    for (const auto& k : result.kept) {
        kept.insert(k.record.id);
    }
    for (std::size_t i = 0; i < c.records.size(); ++i) {
        const bool should_keep = c.truth[i].original && c.truth[i].corruption == Corruption::None;
        CHECK(kept.count(c.records[i].id) == (should_keep ? 1u : 0u));
    }
}

TEST_CASE("perceptual robustness on generated scenes")
{
    int within = 0, total = 0;
    for (int i = 0; i < 200; ++i) {
        const Raster base =
            i % 4 == 3 ? synth::banner(1000 + i, 64) : synth::damage_scene((i % 4) / 3.0 + 0.1, 500 + i, 64);
        const auto h = phash(base);
        for (const Raster& v : {resize_rgb(base, 0.9), resize_rgb(base, 1.1), brightness(base, 0.9),
                                brightness(base, 1.1), border_crop(base, 0.05), text_band(base)}) {
            within += hamming(h, phash(v)) <= 10;
            ++total;
        }
    }
    CHECK(static_cast<double>(within) / total >= 0.95);
}

TEST_CASE("independently drawn images are far apart")
{
    std::vector<PerceptualHash> hashes;
    Rng rng(77);
    for (int i = 0; i < 200; ++i) {
        hashes.push_back(phash(i % 4 == 3 ? synth::banner(rng.next(), 64)
                                          : synth::damage_scene(rng.uniform(), rng.next(), 64)));
    }
    int far = 0, total = 0;
    for (std::size_t a = 0; a < hashes.size(); ++a) {
        for (std::size_t b = a + 1; b < hashes.size(); ++b) {
            far += hamming(hashes[a], hashes[b]) > 10;
            ++total;
        }
    }
    CHECK(static_cast<double>(far) / total >= 0.99);
}

TEST_CASE("threshold sweep")
{
    CorpusSpec s;
    s.seed = 42;
    const auto c = generate_corpus(s);
    const auto a = analyze_corpus(c);
    const auto r1 = sweep_threshold_experiment(c, a, 1100, 42);
    const auto r2 = sweep_threshold_experiment(c, a, 1100, 42);
    CHECK(to_json(r1) == to_json(r2));
    CHECK(curve_csv(r1.tune) == curve_csv(r2.tune));
    CHECK(r1.pairs.size() == 1100);
    CHECK(r1.tune.curve.size() == 21);
    CHECK(curve_csv(r1.tune).rfind("d,accuracy\n", 0) == 0);

    SUBCASE("perturbation-free duplicates give best_d = 0")
    {
        CorpusSpec p = s;
        p.perturbations.clear();
        const auto pc = generate_corpus(p);
        const auto pa = analyze_corpus(pc);
        const auto r = sweep_threshold_experiment(pc, pa, 500, 1);
        CHECK(r.tune.best_d == 0);
        CHECK(r.tune.curve.front().accuracy == doctest::Approx(1.0));
    }
    SUBCASE("too few pairs")
    {
        CHECK_THROWS_AS(sweep_threshold_experiment(c, a, static_cast<int>(r1.pool_size) + 1, 42),
                        std::invalid_argument);
    }
}

TEST_CASE("stratified sample keeps class proportions")
{
    CorpusSpec s;
    s.seed = 8;
    s.n_severe = 90;
    s.n_mild = 40;
    s.n_none = 150;
    s.n_irrelevant = 20;
    const auto c = generate_corpus(s);
    const auto a = analyze_corpus(c);
    const auto pool = usable_labeled(c, a);
    std::array<double, 3> shares{};
    for (auto i : pool) {
        shares[static_cast<int>(*c.records[i].damage)] += 1.0;
    }
    for (int budget : {1, 7, 100, 250}) {
        const auto sample = stratified_sample(c, pool, budget, 3);
        REQUIRE(sample.size() == static_cast<std::size_t>(budget));
        CHECK(std::is_sorted(sample.begin(), sample.end()));
        CHECK(std::set<std::size_t>(sample.begin(), sample.end()).size() == sample.size());
        std::array<std::size_t, 3> counts{};
        for (auto i : sample) {
            ++counts[static_cast<int>(*c.records[i].damage)];
        }
        const auto expect = apportion(static_cast<std::size_t>(budget), shares);
        for (int k = 0; k < 3; ++k) {
            CHECK(counts[k] == expect[k]);
        }
    }
    CHECK(stratified_sample(c, pool, static_cast<int>(pool.size()) + 5, 3).size() == pool.size());
}

TEST_CASE("budget simulation")
{
    BudgetConfig cfg;
    cfg.budget_usd = 300;
    cfg.train.epochs = 100;

    SUBCASE("zero duplicates make S1 and S2 identical")
    {
        CorpusSpec s;
        s.seed = 12;
        s.n_severe = 120;
        s.n_mild = 60;
        s.n_none = 180;
        s.n_irrelevant = 0;
        s.duplicate_rate = 0.0;
        const auto c = generate_corpus(s);
        const auto a = analyze_corpus(c);
        const auto s1 = budget_sim(c, a, cfg, Setting::S1);
        const auto s2 = budget_sim(c, a, cfg, Setting::S2);
        CHECK(s1.sample == s2.sample);
        CHECK(s2.wasted_labels == 0);
        CHECK(s2.wasted_usd == 0.0);
        auto j1 = to_json(s1);
        auto j2 = to_json(s2);
        j1.erase("setting");
        j2.erase("setting");
        CHECK(j1 == j2);
    }
    SUBCASE("duplicates in the sample are counted as waste")
    {
        CorpusSpec s;
        s.seed = 13;
        s.n_severe = 80;
        s.n_mild = 40;
        s.n_none = 120;
        s.n_irrelevant = 0;
        s.duplicate_rate = 0.2;
        const auto c = generate_corpus(s);
        const auto a = analyze_corpus(c);
        cfg.budget_usd = static_cast<int>(c.records.size());
        const auto s2 = budget_sim(c, a, cfg, Setting::S2);
        CHECK(s2.wasted_labels == 60);
        CHECK(s2.sample_size == 240);
        CHECK(s2.wasted_usd == 60.0);
        const auto j = to_json(s2);
        CHECK(j["class_counts"]["severe"].get<long long>() + j["class_counts"]["mild"].get<long long>() +
                  j["class_counts"]["none"].get<long long>() ==
              240);
    }
    SUBCASE("errors")
    {
        CorpusSpec s;
        s.seed = 14;
        s.n_severe = 20;
        s.n_mild = 20;
        s.n_none = 20;
        s.n_irrelevant = 0;
        const auto c = generate_corpus(s);
        const auto a = analyze_corpus(c);
        CHECK_THROWS_AS(budget_sim(c, a, cfg, Setting::S1), std::invalid_argument);
        cfg.budget_usd = 30;
        CHECK_THROWS_AS(budget_sim(c, a, cfg, Setting::S3), std::invalid_argument);
        CHECK(parse_setting("S4") == Setting::S4);
        CHECK_FALSE(parse_setting("S5").has_value());
    }
}
