#include <doctest.h>

#include <cmath>

#include "crisisfilter/features.hpp"
#include "golden.hpp"
#include "oracles.hpp"

using namespace crisisfilter;

TEST_CASE("constant image features")
{
    for (int value : {0, 15, 16, 200, 255}) {
        Raster img(20, 12, 3, std::vector<std::uint8_t>(20 * 12 * 3, value));
        const auto f = extract_features(img);
        REQUIRE(f.size() == kFeatureDim);
        for (int i = 0; i < kDctFeatureCount; ++i) {
            CHECK(std::abs(f[i]) < 1e-9);
        }
        for (int c = 0; c < 3; ++c) {
            for (int b = 0; b < kHistogramBins; ++b) {
                CHECK(f[kDctFeatureCount + c * kHistogramBins + b] == (b == value / 16 ? 1.0 : 0.0));
            }
        }
    }
}

TEST_CASE("grayscale histograms replicate luma")
{
    const auto img = oracle::random_raster(4, 17, 9, 1);
    const auto f = extract_features(img);
    for (int b = 0; b < kHistogramBins; ++b) {
        CHECK(f[kDctFeatureCount + b] == f[kDctFeatureCount + kHistogramBins + b]);
        CHECK(f[kDctFeatureCount + b] == f[kDctFeatureCount + 2 * kHistogramBins + b]);
    }
}

TEST_CASE("features are deterministic and histograms sum to three")
{
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto img = oracle::blob_raster(seed, 40, 30);
        const auto a = extract_features(img);
        const auto b = extract_features(img);
        CHECK(a == b);
        double sum = 0;
        for (int i = kDctFeatureCount; i < kFeatureDim; ++i) {
            sum += a[i];
        }
        CHECK(std::abs(sum - 3.0) < 1e-9);
        for (double v : a) {
            CHECK(std::isfinite(v));
        }
    }
}

TEST_CASE("features match the direct definition")
{
    for (std::uint64_t seed = 20; seed < 24; ++seed) {
        const auto img = oracle::blob_raster(seed, 37, 29);
        const auto fast = extract_features(img);
        const auto slow = oracle::features(img);
        REQUIRE(fast.size() == slow.size());
        for (std::size_t i = 0; i < fast.size(); ++i) {
            CHECK(std::abs(fast[i] - slow[i]) < 1e-9);
        }
    }
}

TEST_CASE("golden feature vector")
{
    // Frozen from oracle::features on the golden gradient image.
    const auto f = extract_features(golden::gradient_image());
    const std::pair<int, double> frozen[] = {
        {0, 1.1580621719718263},   {1, -43.932851163344111}, {8, -153.90809622779091}, {9, 5.9280835514034749},
        {63, 0.21242060515257499}, {64, 0.11669921875},      {70, 0.10986328125},      {80, 0.006591796875},
        {96, 0.05322265625},       {111, 0.05126953125},
    };
    for (auto [i, v] : frozen) {
        CHECK(std::abs(f[i] - v) < 1e-9);
    }
    double dct_sum = 0;
    for (int i = 0; i < kDctFeatureCount; ++i) {
        dct_sum += f[i];
    }
    CHECK(std::abs(dct_sum - -20.077607583323669) < 1e-8);
}
