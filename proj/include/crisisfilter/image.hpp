#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace crisisfilter {

/// 8-bit raster, row-major, interleaved channels (1 = luma, 3 = RGB).
class Raster {
public:
    Raster() = default;
    Raster(int width, int height, int channels);
    Raster(int width, int height, int channels, std::vector<std::uint8_t> data);

    int width() const { return width_; }
    int height() const { return height_; }
    int channels() const { return channels_; }
    bool empty() const { return data_.empty(); }

    const std::vector<std::uint8_t>& data() const { return data_; }
    std::vector<std::uint8_t>& data() { return data_; }

    std::uint8_t at(int x, int y, int c = 0) const
    {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }
    std::uint8_t& at(int x, int y, int c = 0)
    {
        return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
    }

    friend bool operator==(const Raster&, const Raster&) = default;

private:
    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<std::uint8_t> data_;
};

/// Real-valued single-channel plane; samples stay in [0, 255].
struct LumaPlane {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    LumaPlane() = default;
    LumaPlane(int w, int h, double fill = 0.0);

    double at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    double& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
};

inline constexpr int kDctSize = 32;

/// Coefficient grid indexed [row frequency][column frequency].
using DctGrid = std::array<std::array<double, kDctSize>, kDctSize>;

/// BT.601 luma, unrounded. Single-channel input passes through.
LumaPlane to_luma(const Raster& img);

/// 7x7 mean filter; the window is clipped at the borders and the divisor
/// is the number of in-bounds samples.
LumaPlane box_blur7(const LumaPlane& p);

/// Exact area-average resampling.
LumaPlane resize_area(const LumaPlane& p, int out_w, int out_h);

/// Orthonormal 2D DCT-II of a 32x32 plane. Throws std::invalid_argument on
/// any other size.
DctGrid dct2_32(const LumaPlane& p);

/// Luma -> blur -> 32x32 -> DCT: the shared front end of hashing and
/// feature extraction.
DctGrid dct_chain(const Raster& img);

}  // namespace crisisfilter
