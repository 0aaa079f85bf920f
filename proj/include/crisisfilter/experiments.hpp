#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "crisisfilter/classifier.hpp"
#include "crisisfilter/corpus.hpp"
#include "crisisfilter/hash_window.hpp"
#include "crisisfilter/metrics.hpp"
#include "crisisfilter/threshold.hpp"

namespace crisisfilter {

/// Decoded view of a corpus: hash and feature vector per usable record.
struct CorpusAnalysis {
    std::vector<bool> usable;  // payload present and decodable
    std::vector<PerceptualHash> hashes;
    std::vector<FeatureVector> features;
};

CorpusAnalysis analyze_corpus(const Corpus& corpus);

struct SweepResult {
    ThresholdCurve tune;
    std::vector<AnnotatedPair> pairs;
    std::size_t pool_size = 0;  // candidate pairs within max_distance
};

/// Samples `n_pairs` distinct image pairs among those whose hash distance is
/// at most `max_distance`, labels them same/different from the duplicate
/// groups, and tunes the threshold over [0, max_distance].
SweepResult sweep_threshold_experiment(const Corpus& corpus, const CorpusAnalysis& analysis, int n_pairs = 1100,
                                       std::uint64_t seed = 42, int max_distance = 20);

std::string curve_csv(const ThresholdCurve& tune);
nlohmann::json to_json(const SweepResult& r);

enum class Setting { S1, S2, S3, S4 };
std::string_view to_string(Setting s);
std::optional<Setting> parse_setting(std::string_view s);

struct BudgetConfig {
    int budget_usd = 6000;
    double cost_per_label = 1.0;
    std::uint64_t sample_seed = 42;
    int folds = 5;
    TrainParams train;
    DedupConfig dedup;
    double relevancy_threshold = 0.5;
};

struct SettingReport {
    Setting setting = Setting::S1;
    std::array<long long, 3> class_counts{};  // severe, mild, none
    std::size_t sample_size = 0;
    long long wasted_labels = 0;  // S2 only: labels spent on duplicates within the S1 sample
    double wasted_usd = 0.0;
    std::vector<std::size_t> sample;  // record indices, arrival order
    EvalReport eval;
    PredictionSet predictions;  // pooled cross-validation predictions
};

/// Labeled records usable for damage training, in arrival order.
std::vector<std::size_t> usable_labeled(const Corpus& corpus, const CorpusAnalysis& analysis);

/// Stratified sample of `budget` items from `pool` (record indices), class
/// sizes by largest-remainder rounding of the pool's class shares. The
/// result is sorted back into arrival order. Takes the whole pool when it
/// is smaller than the budget.
std::vector<std::size_t> stratified_sample(const Corpus& corpus, const std::vector<std::size_t>& pool, int budget,
                                           std::uint64_t seed);

/// Keeps the first arrival of every near-duplicate cluster (fresh window).
std::vector<std::size_t> dedup_filter(const CorpusAnalysis& analysis, const std::vector<std::size_t>& items,
                                      const DedupConfig& cfg);

/// Keeps items the relevancy model scores at or above the threshold.
std::vector<std::size_t> relevancy_filter(const CorpusAnalysis& analysis, const std::vector<std::size_t>& items,
                                          const ClassifierModel& model, double threshold);

/// Balanced relevance training set (label 1 = relevant) built from the
/// corpus's usable labeled records.
std::vector<Sample> relevance_samples(const Corpus& corpus, const CorpusAnalysis& analysis, std::uint64_t seed);

/// Usable labeled records as damage samples, in arrival order.
std::vector<Sample> damage_samples(const Corpus& corpus, const CorpusAnalysis& analysis);

/// Trains the binary relevancy filter on the corpus's balanced relevance
/// dataset (severe/mild vs none images carrying an irrelevant-category tag).
ClassifierModel train_relevancy_model(const Corpus& corpus, const CorpusAnalysis& analysis, const TrainParams& params,
                                      std::uint64_t seed);

/// One annotation-budget setting: S1 raw sample; S2 the S1 sample after
/// dedup; S3 a sample of the relevancy-filtered corpus; S4 a sample of the
/// corpus after relevancy then dedup. The damage classifier is evaluated
/// by pooled k-fold cross-validation on the sample. S3 and S4 need the
/// relevancy model.
SettingReport budget_sim(const Corpus& corpus, const CorpusAnalysis& analysis, const BudgetConfig& cfg, Setting s,
                         const ClassifierModel* relevancy = nullptr);

nlohmann::json to_json(const SettingReport& r);

}  // namespace crisisfilter
