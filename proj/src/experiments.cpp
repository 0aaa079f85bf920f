#include "crisisfilter/experiments.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "crisisfilter/dataset.hpp"
#include "crisisfilter/features.hpp"
#include "crisisfilter/netpbm.hpp"
#include "crisisfilter/rng.hpp"

namespace crisisfilter {

CorpusAnalysis analyze_corpus(const Corpus& corpus)
{
    CorpusAnalysis a;
    const std::size_t n = corpus.records.size();
    a.usable.assign(n, false);
    a.hashes.assign(n, PerceptualHash{});
    a.features.assign(n, FeatureVector{});
    for (std::size_t i = 0; i < n; ++i) {
        const auto& payload = corpus.records[i].payload;
        if (payload.empty()) {
            continue;
        }
        try {
            const Raster img = decode_netpbm(payload);
            const DctGrid grid = dct_chain(img);
            a.hashes[i] = hash_from_dct(grid);
            a.features[i] = extract_features(img, grid);
            a.usable[i] = true;
        } catch (const DecodeError&) {
            // left unusable
        }
    }
    return a;
}

SweepResult sweep_threshold_experiment(const Corpus& corpus, const CorpusAnalysis& analysis, int n_pairs,
                                       std::uint64_t seed, int max_distance)
{
    if (n_pairs < 1 || max_distance < 0 || max_distance > 64) {
        throw std::invalid_argument("sweep: n_pairs must be positive and max_distance in [0, 64]");
    }
    std::vector<std::size_t> items;
    for (std::size_t i = 0; i < corpus.records.size(); ++i) {
        if (analysis.usable[i]) {
            items.push_back(i);
        }
    }
    struct Candidate {
        std::uint32_t a, b;
        std::uint8_t distance;
    };
    std::vector<Candidate> pool;
    for (std::size_t x = 0; x < items.size(); ++x) {
        const auto hx = analysis.hashes[items[x]];
        for (std::size_t y = x + 1; y < items.size(); ++y) {
            const int d = hamming(hx, analysis.hashes[items[y]]);
            if (d <= max_distance) {
                pool.push_back({static_cast<std::uint32_t>(items[x]), static_cast<std::uint32_t>(items[y]),
                                static_cast<std::uint8_t>(d)});
            }
        }
    }
    if (pool.size() < static_cast<std::size_t>(n_pairs)) {
        throw std::invalid_argument("sweep: only " + std::to_string(pool.size()) + " pairs within distance " +
                                    std::to_string(max_distance) + ", need " + std::to_string(n_pairs));
    }
    // Partial Fisher-Yates: the first n_pairs slots become a uniform sample.
    Rng rng(seed);
    for (int i = 0; i < n_pairs; ++i) {
        const auto j = i + rng.below(pool.size() - i);
        std::swap(pool[i], pool[j]);
    }
    SweepResult res;
    res.pool_size = pool.size();
    for (int i = 0; i < n_pairs; ++i) {
        const auto& c = pool[i];
        res.pairs.push_back({c.distance, corpus.truth[c.a].group == corpus.truth[c.b].group});
    }
    res.tune = tune_threshold(res.pairs, 0, max_distance);
    return res;
}

std::string curve_csv(const ThresholdCurve& tune)
{
    std::ostringstream out;
    out << "d,accuracy\n";
    char buf[64];
    for (const auto& p : tune.curve) {
        std::snprintf(buf, sizeof buf, "%d,%.6f\n", p.d, p.accuracy);
        out << buf;
    }
    return out.str();
}

nlohmann::json to_json(const SweepResult& r)
{
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& p : r.tune.curve) {
        curve.push_back({{"d", p.d}, {"accuracy", p.accuracy}});
    }
    long long same = 0;
    for (const auto& p : r.pairs) {
        same += p.is_same;
    }
    return {{"best_d", r.tune.best_d},
            {"curve", curve},
            {"n_pairs", r.pairs.size()},
            {"same_pairs", same},
            {"pool_size", r.pool_size}};
}

std::string_view to_string(Setting s)
{
    switch (s) {
    case Setting::S1: return "S1";
    case Setting::S2: return "S2";
    case Setting::S3: return "S3";
    case Setting::S4: return "S4";
    }
    return "?";
}

std::optional<Setting> parse_setting(std::string_view s)
{
    for (auto v : {Setting::S1, Setting::S2, Setting::S3, Setting::S4}) {
        if (to_string(v) == s) {
            return v;
        }
    }
    return std::nullopt;
}

std::vector<std::size_t> usable_labeled(const Corpus& corpus, const CorpusAnalysis& analysis)
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < corpus.records.size(); ++i) {
        if (analysis.usable[i] && corpus.records[i].damage) {
            out.push_back(i);
        }
    }
    return out;
}

std::vector<std::size_t> stratified_sample(const Corpus& corpus, const std::vector<std::size_t>& pool, int budget,
                                           std::uint64_t seed)
{
    if (budget < 1) {
        throw std::invalid_argument("budget must be at least 1");
    }
    if (pool.size() <= static_cast<std::size_t>(budget)) {
        auto all = pool;
        std::sort(all.begin(), all.end());
        return all;
    }
    std::array<std::vector<std::size_t>, 3> by_class;
    for (auto i : pool) {
        by_class[static_cast<int>(*corpus.records[i].damage)].push_back(i);
    }
    std::array<double, 3> shares{};
    for (int c = 0; c < 3; ++c) {
        shares[c] = static_cast<double>(by_class[c].size());
    }
    const auto sizes = apportion(static_cast<std::size_t>(budget), shares);
    Rng rng(seed);
    std::vector<std::size_t> out;
    for (int c = 0; c < 3; ++c) {
        rng.shuffle(std::span<std::size_t>(by_class[c]));
        out.insert(out.end(), by_class[c].begin(), by_class[c].begin() + static_cast<std::ptrdiff_t>(sizes[c]));
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::size_t> dedup_filter(const CorpusAnalysis& analysis, const std::vector<std::size_t>& items,
                                      const DedupConfig& cfg)
{
    HashWindow window(cfg);
    std::vector<std::size_t> out;
    for (auto i : items) {
        if (!window.check_and_insert(analysis.hashes[i], std::to_string(i)).duplicate()) {
            out.push_back(i);
        }
    }
    return out;
}

std::vector<std::size_t> relevancy_filter(const CorpusAnalysis& analysis, const std::vector<std::size_t>& items,
                                          const ClassifierModel& model, double threshold)
{
    const int col = model.class_index("relevant");
    if (col < 0) {
        throw std::invalid_argument("relevancy model has no 'relevant' class");
    }
    std::vector<std::size_t> out;
    for (auto i : items) {
        if (score(model, analysis.features[i])[col] >= threshold) {
            out.push_back(i);
        }
    }
    return out;
}

std::vector<Sample> relevance_samples(const Corpus& corpus, const CorpusAnalysis& analysis, std::uint64_t seed)
{
    std::vector<LabeledImage> candidates;
    for (std::size_t i = 0; i < corpus.records.size(); ++i) {
        if (analysis.usable[i] && corpus.records[i].damage) {
            LabeledImage li;
            li.id = std::to_string(i);  // carries the record index through
            li.damage = corpus.records[i].damage;
            li.object_tags = corpus.records[i].object_tags;
            candidates.push_back(std::move(li));
        }
    }
    const auto balanced = build_relevance_dataset(candidates, default_irrelevant_categories(), seed);
    std::vector<Sample> data;
    data.reserve(balanced.size());
    for (const auto& li : balanced) {
        const auto i = static_cast<std::size_t>(std::stoull(li.id));
        data.push_back({analysis.features[i], *li.relevance == Relevance::Relevant ? 1 : 0});
    }
    return data;
}

std::vector<Sample> damage_samples(const Corpus& corpus, const CorpusAnalysis& analysis)
{
    std::vector<Sample> data;
    for (auto i : usable_labeled(corpus, analysis)) {
        data.push_back({analysis.features[i], static_cast<int>(*corpus.records[i].damage)});
    }
    return data;
}

ClassifierModel train_relevancy_model(const Corpus& corpus, const CorpusAnalysis& analysis, const TrainParams& params,
                                      std::uint64_t seed)
{
    return train(relevance_samples(corpus, analysis, seed), relevance_classes(), params);
}

SettingReport budget_sim(const Corpus& corpus, const CorpusAnalysis& analysis, const BudgetConfig& cfg, Setting s,
                         const ClassifierModel* relevancy)
{
    if (cfg.budget_usd < 1 || !(cfg.cost_per_label > 0.0)) {
        throw std::invalid_argument("budget must be at least 1 and cost per label positive");
    }
    const auto labels_affordable = static_cast<int>(cfg.budget_usd / cfg.cost_per_label);
    const auto labeled = usable_labeled(corpus, analysis);
    if (labels_affordable > static_cast<int>(labeled.size())) {
        throw std::invalid_argument("budget of " + std::to_string(labels_affordable) + " labels exceeds the " +
                                    std::to_string(labeled.size()) + " usable labeled images");
    }
    if ((s == Setting::S3 || s == Setting::S4) && relevancy == nullptr) {
        throw std::invalid_argument("settings S3 and S4 need a relevancy model");
    }

    SettingReport rep;
    rep.setting = s;
    switch (s) {
    case Setting::S1:
        rep.sample = stratified_sample(corpus, labeled, labels_affordable, cfg.sample_seed);
        break;
    case Setting::S2: {
        const auto s1 = stratified_sample(corpus, labeled, labels_affordable, cfg.sample_seed);
        rep.sample = dedup_filter(analysis, s1, cfg.dedup);
        rep.wasted_labels = static_cast<long long>(s1.size() - rep.sample.size());
        break;
    }
    case Setting::S3:
        rep.sample = stratified_sample(
            corpus, relevancy_filter(analysis, labeled, *relevancy, cfg.relevancy_threshold), labels_affordable,
            cfg.sample_seed);
        break;
    case Setting::S4: {
        const auto relevant = relevancy_filter(analysis, labeled, *relevancy, cfg.relevancy_threshold);
        rep.sample = stratified_sample(corpus, dedup_filter(analysis, relevant, cfg.dedup), labels_affordable,
                                       cfg.sample_seed);
        break;
    }
    }
    rep.sample_size = rep.sample.size();
    rep.wasted_usd = static_cast<double>(rep.wasted_labels) * cfg.cost_per_label;

    std::vector<Sample> data;
    data.reserve(rep.sample.size());
    for (auto i : rep.sample) {
        const int label = static_cast<int>(*corpus.records[i].damage);
        ++rep.class_counts[label];
        data.push_back({analysis.features[i], label});
    }
    auto cv = cross_validate(data, damage_classes(), cfg.train, cfg.folds, cfg.sample_seed);
    rep.eval = std::move(cv.report);
    rep.predictions = std::move(cv.predictions);
    return rep;
}

nlohmann::json to_json(const SettingReport& r)
{
    nlohmann::json counts;
    for (int c = 0; c < 3; ++c) {
        counts[damage_classes()[c]] = r.class_counts[c];
    }
    return {{"setting", std::string(to_string(r.setting))},
            {"class_counts", counts},
            {"sample_size", r.sample_size},
            {"wasted_labels", r.wasted_labels},
            {"wasted_usd", r.wasted_usd},
            {"eval", to_json(r.eval)}};
}

}  // namespace crisisfilter
