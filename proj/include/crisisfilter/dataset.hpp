#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "crisisfilter/classifier.hpp"
#include "crisisfilter/metrics.hpp"
#include "crisisfilter/record.hpp"

namespace crisisfilter {

/// ImageNet categories whose presence marks a "none"-labeled image as
/// irrelevant to damage assessment.
const std::vector<std::string>& default_irrelevant_categories();

/// Severe/Mild images become Relevant candidates; None images carrying any
/// of `irrelevant_categories` form the Irrelevant set. The smaller side is
/// matched by a seeded uniform sample of the larger so the result is
/// balanced. Output keeps input order.
std::vector<LabeledImage> build_relevance_dataset(std::span<const LabeledImage> images,
                                                  const std::vector<std::string>& irrelevant_categories,
                                                  std::uint64_t seed);

/// Fold index per sample: classes are shuffled independently and dealt
/// round-robin, so per-class counts across folds differ by at most one.
/// Every class needs at least k members unless k equals the sample count
/// (leave-one-out).
std::vector<int> stratified_folds(std::span<const int> labels, int n_classes, int k, std::uint64_t seed);

struct CrossValidation {
    PredictionSet predictions;  // pooled over folds, in sample order
    EvalReport report;
};

CrossValidation cross_validate(std::span<const Sample> data, const std::vector<std::string>& classes,
                               const TrainParams& params, int k, std::uint64_t seed);

/// Sizes of a split of n items by largest-remainder rounding.
std::vector<std::size_t> apportion(std::size_t n, std::span<const double> fractions);

/// Part index (0 = train, 1 = validation, 2 = test) for each sample. Part
/// sizes follow `apportion` on the total; classes are interleaved so each
/// part keeps the class mix.
std::vector<int> stratified_split(std::span<const int> labels, int n_classes, std::span<const double> fractions,
                                  std::uint64_t seed);

struct SplitResult {
    ClassifierModel model;
    int selected_epoch = 0;
    EvalReport validation;
    EvalReport test;
    std::array<std::size_t, 3> sizes{};
};

/// 60/20/20 protocol: train on the first part, keep the checkpoint (every
/// `checkpoint_every` epochs) with the best validation macro F1, report on
/// the held-out part.
SplitResult train_split(std::span<const Sample> data, const std::vector<std::string>& classes,
                        const TrainParams& params, std::uint64_t seed, int checkpoint_every = 50);

PredictionSet predict_all(const ClassifierModel& m, std::span<const Sample> data);

}  // namespace crisisfilter
