#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

namespace crisisfilter {

struct Prediction {
    int truth = 0;
    int predicted = 0;
    std::vector<double> scores;  // one probability per class
};

struct PredictionSet {
    std::vector<std::string> classes;
    std::vector<Prediction> items;
};

struct ClassScores {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double auc_pr = 0.0;
    long long support = 0;
};

struct EvalReport {
    std::vector<std::string> classes;
    std::vector<ClassScores> per_class;
    ClassScores macro;  // support holds the item count
    std::vector<std::vector<long long>> confusion;  // [truth][predicted]
    double accuracy = 0.0;
};

/// One-vs-rest precision/recall/F1/AP per class plus unweighted macro
/// means. Zero denominators yield 0.
EvalReport evaluate(const PredictionSet& p);

/// Macro F1 from labels alone (no score columns needed).
double macro_f1(std::span<const int> truth, std::span<const int> predicted, int n_classes);

/// Average precision: sum over ranks of (R_n - R_{n-1}) * P_n, ranking by
/// descending score with ties kept in input order. Throws when there is no
/// positive.
double auc_pr(std::span<const std::uint8_t> truth, std::span<const double> scores);

struct PrPoint {
    double threshold;
    double precision;
    double recall;
};

/// Precision/recall after each ranked prediction, for plotting.
std::vector<PrPoint> pr_curve(std::span<const std::uint8_t> truth, std::span<const double> scores);

struct PermutationResult {
    double observed_diff = 0.0;
    double p_value = 1.0;
    std::vector<double> diff_samples;
};

/// Two-sided test of macro-F1(a) - macro-F1(b). Each shuffle s repartitions
/// the pooled (truth, prediction) pairs with a generator seeded seed + s.
/// p = (1 + #{|shuffled| >= |observed|}) / (n_shuffles + 1).
PermutationResult permutation_test(const PredictionSet& a, const PredictionSet& b, int n_shuffles,
                                   std::uint64_t seed);

nlohmann::json to_json(const EvalReport& r);

/// {"classes": [...], "items": [{"truth", "predicted", "scores"}]}.
nlohmann::json to_json(const PredictionSet& p);
PredictionSet prediction_set_from_json(const nlohmann::json& j);
std::string pr_curve_csv(std::span<const PrPoint> curve);

}  // namespace crisisfilter
