#include "crisisfilter/features.hpp"

#include <array>

namespace crisisfilter {

FeatureVector extract_features(const Raster& img)
{
    return extract_features(img, dct_chain(img));
}

FeatureVector extract_features(const Raster& img, const DctGrid& grid)
{
    FeatureVector f;
    f.reserve(kFeatureDim);
    for (int r = 1; r <= 8; ++r) {
        for (int c = 1; c <= 8; ++c) {
            f.push_back(grid[r][c]);
        }
    }

    std::array<std::array<long long, kHistogramBins>, 3> hist{};
    const auto& data = img.data();
    const int ch = img.channels();
    const std::size_t pixels = data.size() / ch;
    for (std::size_t i = 0; i < pixels; ++i) {
        for (int c = 0; c < 3; ++c) {
            const auto v = data[i * ch + (ch == 1 ? 0 : c)];
            ++hist[c][v / (256 / kHistogramBins)];
        }
    }
    for (const auto& channel : hist) {
        for (auto count : channel) {
            f.push_back(static_cast<double>(count) / static_cast<double>(pixels));
        }
    }
    return f;
}

}  // namespace crisisfilter
