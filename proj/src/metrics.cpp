#include "crisisfilter/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "crisisfilter/rng.hpp"

namespace crisisfilter {

namespace {

double ratio(long long num, long long den)
{
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

double harmonic(double p, double r)
{
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

std::vector<std::size_t> rank_by_score(std::span<const double> scores)
{
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    return order;
}

// Macro F1 over a confusion built from index subsets of the pooled pairs.
double macro_f1_subset(std::span<const int> truth, std::span<const int> pred, std::span<const std::uint32_t> idx,
                       int n_classes, std::vector<long long>& tp, std::vector<long long>& fp,
                       std::vector<long long>& fn)
{
    std::fill(tp.begin(), tp.end(), 0);
    std::fill(fp.begin(), fp.end(), 0);
    std::fill(fn.begin(), fn.end(), 0);
    for (auto i : idx) {
        const int t = truth[i];
        const int p = pred[i];
        if (t == p) {
            ++tp[t];
        } else {
            ++fp[p];
            ++fn[t];
        }
    }
    double sum = 0.0;
    for (int c = 0; c < n_classes; ++c) {
        sum += harmonic(ratio(tp[c], tp[c] + fp[c]), ratio(tp[c], tp[c] + fn[c]));
    }
    return sum / n_classes;
}

void check_labels(const PredictionSet& p)
{
    const int k = static_cast<int>(p.classes.size());
    if (k < 1) {
        throw std::invalid_argument("prediction set has no classes");
    }
    for (const auto& it : p.items) {
        if (it.truth < 0 || it.truth >= k || it.predicted < 0 || it.predicted >= k) {
            throw std::invalid_argument("prediction label outside class list");
        }
    }
}

}  // namespace

EvalReport evaluate(const PredictionSet& p)
{
    if (p.items.empty()) {
        throw std::invalid_argument("evaluate: empty prediction set");
    }
    check_labels(p);
    const int k = static_cast<int>(p.classes.size());

    EvalReport r;
    r.classes = p.classes;
    r.confusion.assign(k, std::vector<long long>(k, 0));
    for (const auto& it : p.items) {
        ++r.confusion[it.truth][it.predicted];
    }

    const bool have_scores = std::all_of(p.items.begin(), p.items.end(), [k](const Prediction& it) {
        return it.scores.size() == static_cast<std::size_t>(k);
    });
    long long correct = 0;
    r.per_class.resize(k);
    for (int c = 0; c < k; ++c) {
        long long tp = r.confusion[c][c];
        long long row = 0;
        long long col = 0;
        for (int j = 0; j < k; ++j) {
            row += r.confusion[c][j];
            col += r.confusion[j][c];
        }
        correct += tp;
        auto& s = r.per_class[c];
        s.support = row;
        s.precision = ratio(tp, col);
        s.recall = ratio(tp, row);
        s.f1 = harmonic(s.precision, s.recall);

        if (row > 0 && have_scores) {
            std::vector<std::uint8_t> truth(p.items.size());
            std::vector<double> scores(p.items.size());
            for (std::size_t i = 0; i < p.items.size(); ++i) {
                truth[i] = p.items[i].truth == c;
                scores[i] = p.items[i].scores[c];
            }
            s.auc_pr = auc_pr(truth, scores);
        }
    }
    for (const auto& s : r.per_class) {
        r.macro.precision += s.precision / k;
        r.macro.recall += s.recall / k;
        r.macro.f1 += s.f1 / k;
        r.macro.auc_pr += s.auc_pr / k;
    }
    r.macro.support = static_cast<long long>(p.items.size());
    r.accuracy = ratio(correct, r.macro.support);
    return r;
}

double macro_f1(std::span<const int> truth, std::span<const int> predicted, int n_classes)
{
    if (truth.size() != predicted.size()) {
        throw std::invalid_argument("macro_f1: length mismatch");
    }
    std::vector<std::uint32_t> idx(truth.size());
    std::iota(idx.begin(), idx.end(), 0u);
    std::vector<long long> tp(n_classes), fp(n_classes), fn(n_classes);
    return macro_f1_subset(truth, predicted, idx, n_classes, tp, fp, fn);
}

double auc_pr(std::span<const std::uint8_t> truth, std::span<const double> scores)
{
    if (truth.size() != scores.size()) {
        throw std::invalid_argument("auc_pr: length mismatch");
    }
    const auto positives = std::count_if(truth.begin(), truth.end(), [](auto t) { return t != 0; });
    if (positives == 0) {
        throw std::invalid_argument("auc_pr: no positive items");
    }
    double ap = 0.0;
    long long tp = 0;
    long long seen = 0;
    for (auto i : rank_by_score(scores)) {
        ++seen;
        if (truth[i]) {
            ++tp;
            // Recall steps by 1/P exactly at positive ranks.
            ap += static_cast<double>(tp) / static_cast<double>(seen);
        }
    }
    return ap / static_cast<double>(positives);
}

std::vector<PrPoint> pr_curve(std::span<const std::uint8_t> truth, std::span<const double> scores)
{
    const auto positives = std::count_if(truth.begin(), truth.end(), [](auto t) { return t != 0; });
    std::vector<PrPoint> out;
    out.reserve(truth.size());
    long long tp = 0;
    long long seen = 0;
    for (auto i : rank_by_score(scores)) {
        ++seen;
        tp += truth[i] != 0;
        out.push_back({scores[i], ratio(tp, seen), ratio(tp, positives)});
    }
    return out;
}

PermutationResult permutation_test(const PredictionSet& a, const PredictionSet& b, int n_shuffles,
                                   std::uint64_t seed)
{
    if (a.classes != b.classes) {
        throw std::invalid_argument("permutation_test: class lists differ");
    }
    if (a.items.empty() || b.items.empty()) {
        throw std::invalid_argument("permutation_test: both sets must be non-empty");
    }
    if (n_shuffles < 1) {
        throw std::invalid_argument("permutation_test: need at least one shuffle");
    }
    check_labels(a);
    check_labels(b);
    const int k = static_cast<int>(a.classes.size());

    std::vector<int> truth;
    std::vector<int> pred;
    for (const auto* set : {&a, &b}) {
        for (const auto& it : set->items) {
            truth.push_back(it.truth);
            pred.push_back(it.predicted);
        }
    }
    const std::size_t na = a.items.size();
    std::vector<std::uint32_t> idx(truth.size());
    std::iota(idx.begin(), idx.end(), 0u);
    std::vector<long long> tp(k), fp(k), fn(k);
    const std::span<const std::uint32_t> all(idx);

    PermutationResult res;
    res.observed_diff = macro_f1_subset(truth, pred, all.first(na), k, tp, fp, fn) -
                        macro_f1_subset(truth, pred, all.subspan(na), k, tp, fp, fn);

    // Guards the >= comparison against summation-order noise when the
    // shuffled statistic equals the observed one.
    constexpr double kTieTolerance = 1e-12;
    const double observed_abs = std::abs(res.observed_diff);
    long long extreme = 0;
    res.diff_samples.reserve(n_shuffles);
    std::vector<std::uint32_t> perm(idx.size());
    for (int s = 0; s < n_shuffles; ++s) {
        std::iota(perm.begin(), perm.end(), 0u);
        Rng rng(seed + static_cast<std::uint64_t>(s));
        rng.shuffle(std::span<std::uint32_t>(perm));
        const std::span<const std::uint32_t> view(perm);
        const double diff = macro_f1_subset(truth, pred, view.first(na), k, tp, fp, fn) -
                            macro_f1_subset(truth, pred, view.subspan(na), k, tp, fp, fn);
        res.diff_samples.push_back(diff);
        if (std::abs(diff) >= observed_abs - kTieTolerance) {
            ++extreme;
        }
    }
    res.p_value = static_cast<double>(1 + extreme) / static_cast<double>(n_shuffles + 1);
    return res;
}

nlohmann::json to_json(const EvalReport& r)
{
    auto scores = [](const ClassScores& s) {
        return nlohmann::json{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1},
                              {"auc_pr", s.auc_pr}, {"support", s.support}};
    };
    nlohmann::json per_class = nlohmann::json::object();
    for (std::size_t c = 0; c < r.classes.size(); ++c) {
        per_class[r.classes[c]] = scores(r.per_class[c]);
    }
    nlohmann::json macro = scores(r.macro);
    macro.erase("support");
    return {{"classes", r.classes},
            {"per_class", per_class},
            {"macro", macro},
            {"confusion", r.confusion},
            {"accuracy", r.accuracy},
            {"count", r.macro.support}};
}

nlohmann::json to_json(const PredictionSet& p)
{
    nlohmann::json items = nlohmann::json::array();
    for (const auto& it : p.items) {
        items.push_back({{"truth", it.truth}, {"predicted", it.predicted}, {"scores", it.scores}});
    }
    return {{"classes", p.classes}, {"items", items}};
}

PredictionSet prediction_set_from_json(const nlohmann::json& j)
{
    if (!j.is_object() || !j.contains("classes") || !j.contains("items")) {
        throw std::invalid_argument("prediction set needs 'classes' and 'items'");
    }
    PredictionSet p;
    p.classes = j.at("classes").get<std::vector<std::string>>();
    for (const auto& it : j.at("items")) {
        Prediction pred;
        pred.truth = it.at("truth").get<int>();
        pred.predicted = it.at("predicted").get<int>();
        if (it.contains("scores")) {
            pred.scores = it.at("scores").get<std::vector<double>>();
        }
        p.items.push_back(std::move(pred));
    }
    check_labels(p);
    return p;
}

std::string pr_curve_csv(std::span<const PrPoint> curve)
{
    std::ostringstream out;
    out.precision(17);
    out << "threshold,precision,recall\n";
    for (const auto& p : curve) {
        out << p.threshold << ',' << p.precision << ',' << p.recall << '\n';
    }
    return out.str();
}

}  // namespace crisisfilter
