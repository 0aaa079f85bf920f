#pragma once

#include <vector>

#include "crisisfilter/image.hpp"

namespace crisisfilter {

using FeatureVector = std::vector<double>;

inline constexpr int kDctFeatureCount = 64;
inline constexpr int kHistogramBins = 16;
inline constexpr int kFeatureDim = kDctFeatureCount + 3 * kHistogramBins;  // 112
inline constexpr const char* kFeatureSpecId = "dct64+rgbhist48";

/// 64 low-frequency DCT coefficients (rows/cols 1..8 of the hashing chain,
/// before binarization) followed by three 16-bin channel histograms, each
/// normalized to sum 1. Grayscale input contributes its luma to all three.
FeatureVector extract_features(const Raster& img);

/// Same, reusing an already computed DCT grid of `img`.
FeatureVector extract_features(const Raster& img, const DctGrid& grid);

}  // namespace crisisfilter
