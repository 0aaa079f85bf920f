#include "crisisfilter/image.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace crisisfilter {

Raster::Raster(int width, int height, int channels)
    : Raster(width, height, channels,
             std::vector<std::uint8_t>(static_cast<std::size_t>(width) * height * channels, 0))
{
}

Raster::Raster(int width, int height, int channels, std::vector<std::uint8_t> data)
    : width_(width), height_(height), channels_(channels), data_(std::move(data))
{
    if (width < 1 || height < 1) {
        throw std::invalid_argument("raster dimensions must be positive");
    }
    if (channels != 1 && channels != 3) {
        throw std::invalid_argument("raster must have 1 or 3 channels, got " + std::to_string(channels));
    }
    if (data_.size() != static_cast<std::size_t>(width) * height * channels) {
        throw std::invalid_argument("raster data length does not match width*height*channels");
    }
}

LumaPlane::LumaPlane(int w, int h, double fill)
    : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill)
{
}

LumaPlane to_luma(const Raster& img)
{
    LumaPlane out(img.width(), img.height());
    const auto& src = img.data();
    if (img.channels() == 1) {
        for (std::size_t i = 0; i < src.size(); ++i) {
            out.data[i] = src[i];
        }
        return out;
    }
    for (std::size_t i = 0; i < out.data.size(); ++i) {
        const std::size_t k = 3 * i;
        out.data[i] = 0.299 * src[k] + 0.587 * src[k + 1] + 0.114 * src[k + 2];
    }
    return out;
}

namespace {

// Clipped 1D running mean of radius 3 along one axis. Because the clipped
// 2D window is a product of two clipped intervals, applying this along x
// then y gives the 2D clipped mean.
void mean7_line(const double* in, double* out, int n, std::ptrdiff_t stride)
{
    for (int i = 0; i < n; ++i) {
        const int lo = std::max(0, i - 3);
        const int hi = std::min(n - 1, i + 3);
        double sum = 0.0;
        for (int j = lo; j <= hi; ++j) {
            sum += in[j * stride];
        }
        out[i * stride] = sum / (hi - lo + 1);
    }
}

// Row k of the area-resampling operator: overlap of input cell i with output
// cell o, measured in units where an input cell has length out_n and an
// output cell has length in_n. Overlaps are exact integers.
std::vector<std::vector<std::pair<int, double>>> area_weights(int in_n, int out_n)
{
    std::vector<std::vector<std::pair<int, double>>> rows(out_n);
    for (int o = 0; o < out_n; ++o) {
        const long long o_lo = static_cast<long long>(o) * in_n;
        const long long o_hi = o_lo + in_n;
        const int first = static_cast<int>(o_lo / out_n);
        for (int i = first; i < in_n; ++i) {
            const long long i_lo = static_cast<long long>(i) * out_n;
            const long long i_hi = i_lo + out_n;
            if (i_lo >= o_hi) {
                break;
            }
            const long long overlap = std::min(o_hi, i_hi) - std::max(o_lo, i_lo);
            if (overlap > 0) {
                rows[o].emplace_back(i, static_cast<double>(overlap) / in_n);
            }
        }
    }
    return rows;
}

const DctGrid& dct_basis()
{
    static const DctGrid basis = [] {
        DctGrid b{};
        for (int u = 0; u < kDctSize; ++u) {
            const double alpha = u == 0 ? std::sqrt(1.0 / kDctSize) : std::sqrt(2.0 / kDctSize);
            for (int x = 0; x < kDctSize; ++x) {
                b[u][x] = alpha * std::cos((2 * x + 1) * u * std::numbers::pi / (2.0 * kDctSize));
            }
        }
        return b;
    }();
    return basis;
}

}  // namespace

LumaPlane box_blur7(const LumaPlane& p)
{
    LumaPlane tmp(p.width, p.height);
    LumaPlane out(p.width, p.height);
    for (int y = 0; y < p.height; ++y) {
        const std::size_t row = static_cast<std::size_t>(y) * p.width;
        mean7_line(p.data.data() + row, tmp.data.data() + row, p.width, 1);
    }
    for (int x = 0; x < p.width; ++x) {
        mean7_line(tmp.data.data() + x, out.data.data() + x, p.height, p.width);
    }
    return out;
}

LumaPlane resize_area(const LumaPlane& p, int out_w, int out_h)
{
    if (out_w < 1 || out_h < 1) {
        throw std::invalid_argument("resize target must be at least 1x1");
    }
    const auto wx = area_weights(p.width, out_w);
    const auto wy = area_weights(p.height, out_h);

    LumaPlane horiz(out_w, p.height);
    for (int y = 0; y < p.height; ++y) {
        for (int ox = 0; ox < out_w; ++ox) {
            double acc = 0.0;
            for (const auto& [ix, w] : wx[ox]) {
                acc += w * p.at(ix, y);
            }
            horiz.at(ox, y) = acc;
        }
    }
    LumaPlane out(out_w, out_h);
    for (int oy = 0; oy < out_h; ++oy) {
        for (int ox = 0; ox < out_w; ++ox) {
            double acc = 0.0;
            for (const auto& [iy, w] : wy[oy]) {
                acc += w * horiz.at(ox, iy);
            }
            out.at(ox, oy) = acc;
        }
    }
    return out;
}

DctGrid dct2_32(const LumaPlane& p)
{
    if (p.width != kDctSize || p.height != kDctSize) {
        throw std::invalid_argument("dct2_32 requires a 32x32 plane, got " + std::to_string(p.width) + "x" +
                                    std::to_string(p.height));
    }
    const DctGrid& a = dct_basis();

    // tmp = A * F  (transform columns), then C = tmp * A^T (transform rows).
    DctGrid tmp{};
    for (int u = 0; u < kDctSize; ++u) {
        for (int y = 0; y < kDctSize; ++y) {
            const double w = a[u][y];
            for (int x = 0; x < kDctSize; ++x) {
                tmp[u][x] += w * p.at(x, y);
            }
        }
    }
    DctGrid c{};
    for (int u = 0; u < kDctSize; ++u) {
        for (int v = 0; v < kDctSize; ++v) {
            double acc = 0.0;
            for (int x = 0; x < kDctSize; ++x) {
                acc += tmp[u][x] * a[v][x];
            }
            c[u][v] = acc;
        }
    }
    return c;
}

DctGrid dct_chain(const Raster& img)
{
    return dct2_32(resize_area(box_blur7(to_luma(img)), kDctSize, kDctSize));
}

}  // namespace crisisfilter
