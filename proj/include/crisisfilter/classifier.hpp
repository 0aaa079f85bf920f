#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "crisisfilter/features.hpp"

namespace crisisfilter {

struct TrainParams {
    std::uint64_t seed = 42;
    int epochs = 500;
    double lambda = 1e-4;
    double learning_rate = 0.1;
    double decay = 0.5;
    int decay_every = 100;

    friend bool operator==(const TrainParams&, const TrainParams&) = default;
};

struct Sample {
    FeatureVector x;
    int label = 0;  // index into the class list
};

/// Multinomial logistic regression over standardized features.
struct ClassifierModel {
    std::vector<std::string> classes;
    std::string feature_id = kFeatureSpecId;
    int dim = 0;
    std::vector<double> mean;   // per-dimension standardization
    std::vector<double> scale;
    std::vector<double> weights;  // classes x (dim + 1), row-major, bias last
    TrainParams meta;

    int class_index(const std::string& name) const;  // -1 if absent
    double weight(int k, int j) const { return weights[static_cast<std::size_t>(k) * (dim + 1) + j]; }

    friend bool operator==(const ClassifierModel&, const ClassifierModel&) = default;
};

/// Standardized samples with a trailing bias column of ones, row-major.
struct DesignMatrix {
    int rows = 0;
    int cols = 0;  // dim + 1
    std::vector<double> x;
    std::vector<int> y;

    const double* row(int i) const { return x.data() + static_cast<std::size_t>(i) * cols; }
};

DesignMatrix design_matrix(std::span<const Sample> data, std::span<const double> mean, std::span<const double> scale);

/// Mean cross-entropy plus lambda * ||W||^2 over non-bias weights. Fills
/// `grad` (same layout as weights) when non-null.
double softmax_loss(const DesignMatrix& m, std::span<const double> weights, int n_classes, double lambda,
                    std::vector<double>* grad);

/// Called after every epoch with the 1-based epoch count.
using EpochCallback = std::function<void(int epoch, const ClassifierModel& model)>;

/// Full-batch gradient descent from zero weights; learning rate is scaled
/// by `decay` every `decay_every` epochs.
ClassifierModel train(std::span<const Sample> data, const std::vector<std::string>& classes,
                      const TrainParams& params = {}, const EpochCallback& on_epoch = {});

/// Softmax class probabilities.
std::vector<double> score(const ClassifierModel& m, std::span<const double> features);

/// Argmax of `score`, lowest index on ties.
int predict(const ClassifierModel& m, std::span<const double> features);

std::vector<std::uint8_t> encode_model(const ClassifierModel& m);
ClassifierModel decode_model(std::span<const std::uint8_t> bytes);
void save_model(const ClassifierModel& m, const std::filesystem::path& path);
ClassifierModel load_model(const std::filesystem::path& path);

}  // namespace crisisfilter
