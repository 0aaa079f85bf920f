#include "crisisfilter/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <tuple>

#include "crisisfilter/rng.hpp"

namespace crisisfilter {

const std::vector<std::string>& default_irrelevant_categories()
{
    // Fourteen names, although the source text calls them "12 categories".
    static const std::vector<std::string> names{
        "website", "suit",   "lab coat", "envelope",    "dust jacket", "candle",       "menu",
        "vestment", "monitor", "street sign", "puzzle", "television", "cash machine", "screen"};
    return names;
}

std::vector<LabeledImage> build_relevance_dataset(std::span<const LabeledImage> images,
                                                  const std::vector<std::string>& irrelevant_categories,
                                                  std::uint64_t seed)
{
    std::vector<std::size_t> relevant;
    std::vector<std::size_t> irrelevant;
    for (std::size_t i = 0; i < images.size(); ++i) {
        const auto& img = images[i];
        if (!img.damage) {
            continue;
        }
        if (*img.damage != DamageLabel::None) {
            relevant.push_back(i);
            continue;
        }
        const bool tagged = std::any_of(img.object_tags.begin(), img.object_tags.end(), [&](const std::string& t) {
            return std::find(irrelevant_categories.begin(), irrelevant_categories.end(), t) !=
                   irrelevant_categories.end();
        });
        if (tagged) {
            irrelevant.push_back(i);
        }
    }
    if (relevant.empty() || irrelevant.empty()) {
        throw std::invalid_argument("build_relevance_dataset: need both relevant and irrelevant images");
    }

    Rng rng(seed);
    auto sample_down = [&rng](std::vector<std::size_t>& pool, std::size_t k) {
        if (pool.size() > k) {
            rng.shuffle(std::span<std::size_t>(pool));
            pool.resize(k);
            std::sort(pool.begin(), pool.end());
        }
    };
    const std::size_t k = std::min(relevant.size(), irrelevant.size());
    sample_down(relevant, k);
    sample_down(irrelevant, k);

    std::vector<std::pair<std::size_t, Relevance>> chosen;
    for (auto i : relevant) {
        chosen.emplace_back(i, Relevance::Relevant);
    }
    for (auto i : irrelevant) {
        chosen.emplace_back(i, Relevance::Irrelevant);
    }
    std::sort(chosen.begin(), chosen.end());
    std::vector<LabeledImage> out;
    out.reserve(chosen.size());
    for (const auto& [i, rel] : chosen) {
        out.push_back(images[i]);
        out.back().relevance = rel;
    }
    return out;
}

std::vector<int> stratified_folds(std::span<const int> labels, int n_classes, int k, std::uint64_t seed)
{
    if (k < 2) {
        throw std::invalid_argument("cross-validation needs k >= 2");
    }
    std::vector<std::vector<std::size_t>> members(n_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        members.at(labels[i]).push_back(i);
    }
    Rng rng(seed);
    std::vector<int> fold(labels.size(), 0);
    int next = 0;
    for (int c = 0; c < n_classes; ++c) {
        // k equal to the dataset size is leave-one-out and needs no per-class floor.
        if (static_cast<int>(members[c].size()) < k && static_cast<std::size_t>(k) != labels.size()) {
            throw std::invalid_argument("class " + std::to_string(c) + " has fewer members than folds");
        }
        rng.shuffle(std::span<std::size_t>(members[c]));
        // Continue dealing where the previous class stopped to keep fold
        // totals level as well.
        for (auto i : members[c]) {
            fold[i] = next;
            next = (next + 1) % k;
        }
    }
    return fold;
}

PredictionSet predict_all(const ClassifierModel& m, std::span<const Sample> data)
{
    PredictionSet p;
    p.classes = m.classes;
    p.items.reserve(data.size());
    for (const auto& s : data) {
        auto probs = score(m, s.x);
        const int pred = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
        p.items.push_back({s.label, pred, std::move(probs)});
    }
    return p;
}

CrossValidation cross_validate(std::span<const Sample> data, const std::vector<std::string>& classes,
                               const TrainParams& params, int k, std::uint64_t seed)
{
    std::vector<int> labels;
    labels.reserve(data.size());
    for (const auto& s : data) {
        labels.push_back(s.label);
    }
    const auto fold = stratified_folds(labels, static_cast<int>(classes.size()), k, seed);

    CrossValidation cv;
    cv.predictions.classes = classes;
    cv.predictions.items.resize(data.size());
    for (int f = 0; f < k; ++f) {
        std::vector<Sample> train_set;
        std::vector<std::size_t> test_idx;
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (fold[i] == f) {
                test_idx.push_back(i);
            } else {
                train_set.push_back(data[i]);
            }
        }
        const auto model = train(train_set, classes, params);
        for (auto i : test_idx) {
            auto probs = score(model, data[i].x);
            const int pred = static_cast<int>(std::max_element(probs.begin(), probs.end()) - probs.begin());
            cv.predictions.items[i] = {data[i].label, pred, std::move(probs)};
        }
    }
    cv.report = evaluate(cv.predictions);
    return cv;
}

std::vector<std::size_t> apportion(std::size_t n, std::span<const double> fractions)
{
    const double total = std::accumulate(fractions.begin(), fractions.end(), 0.0);
    std::vector<std::size_t> sizes(fractions.size());
    std::vector<std::pair<double, std::size_t>> remainders;
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < fractions.size(); ++i) {
        const double exact = static_cast<double>(n) * fractions[i] / total;
        sizes[i] = static_cast<std::size_t>(std::floor(exact));
        assigned += sizes[i];
        remainders.emplace_back(exact - std::floor(exact), i);
    }
    // Largest remainder first; earlier parts win ties.
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t r = 0; assigned < n; ++r, ++assigned) {
        ++sizes[remainders[r % remainders.size()].second];
    }
    return sizes;
}

std::vector<int> stratified_split(std::span<const int> labels, int n_classes, std::span<const double> fractions,
                                  std::uint64_t seed)
{
    std::vector<std::vector<std::size_t>> members(n_classes);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        members.at(labels[i]).push_back(i);
    }
    Rng rng(seed);
    // Position each member at the midpoint of its slot within its class,
    // then merge: any prefix of the merged order is close to stratified.
    std::vector<std::tuple<double, int, std::size_t>> order;
    order.reserve(labels.size());
    for (int c = 0; c < n_classes; ++c) {
        rng.shuffle(std::span<std::size_t>(members[c]));
        const double n_c = static_cast<double>(members[c].size());
        for (std::size_t j = 0; j < members[c].size(); ++j) {
            order.emplace_back((static_cast<double>(j) + 0.5) / n_c, c, members[c][j]);
        }
    }
    std::sort(order.begin(), order.end());
    const auto sizes = apportion(labels.size(), fractions);
    std::vector<int> part(labels.size(), 0);
    std::size_t pos = 0;
    for (std::size_t p = 0; p < sizes.size(); ++p) {
        for (std::size_t j = 0; j < sizes[p]; ++j, ++pos) {
            part[std::get<2>(order[pos])] = static_cast<int>(p);
        }
    }
    return part;
}

SplitResult train_split(std::span<const Sample> data, const std::vector<std::string>& classes,
                        const TrainParams& params, std::uint64_t seed, int checkpoint_every)
{
    std::vector<int> labels;
    for (const auto& s : data) {
        labels.push_back(s.label);
    }
    const std::array<double, 3> fractions{0.6, 0.2, 0.2};
    const auto part = stratified_split(labels, static_cast<int>(classes.size()), fractions, seed);

    std::array<std::vector<Sample>, 3> parts;
    for (std::size_t i = 0; i < data.size(); ++i) {
        parts[part[i]].push_back(data[i]);
    }
    SplitResult res;
    for (int p = 0; p < 3; ++p) {
        res.sizes[p] = parts[p].size();
        if (parts[p].empty()) {
            throw std::invalid_argument("train_split: dataset too small for a 60/20/20 split");
        }
    }

    double best_f1 = -1.0;
    auto consider = [&](int epoch, const ClassifierModel& m) {
        const auto report = evaluate(predict_all(m, parts[1]));
        if (report.macro.f1 > best_f1) {
            best_f1 = report.macro.f1;
            res.model = m;
            res.selected_epoch = epoch;
            res.validation = report;
        }
    };
    const auto final_model = train(parts[0], classes, params, [&](int epoch, const ClassifierModel& m) {
        if (epoch % checkpoint_every == 0) {
            consider(epoch, m);
        }
    });
    if (params.epochs % checkpoint_every != 0 || params.epochs == 0) {
        consider(params.epochs, final_model);
    }
    res.test = evaluate(predict_all(res.model, parts[2]));
    return res;
}

}  // namespace crisisfilter
