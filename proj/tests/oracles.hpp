#pragma once

// Straightforward reference implementations used only by tests. They follow
// the textbook formulas directly and share no code with the library paths
// they check.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "crisisfilter/image.hpp"
#include "crisisfilter/phash.hpp"
#include "crisisfilter/rng.hpp"

namespace oracle {

using crisisfilter::DctGrid;
using crisisfilter::LumaPlane;
using crisisfilter::Raster;

inline Raster random_raster(std::uint64_t seed, int w, int h, int channels)
{
    crisisfilter::Rng rng(seed);
    Raster r(w, h, channels);
    for (auto& v : r.data()) {
        v = static_cast<std::uint8_t>(rng.below(256));
    }
    return r;
}

// Smooth-ish random image: a few random blobs over a gradient, so hashes
// are not dominated by white noise.
inline Raster blob_raster(std::uint64_t seed, int w, int h)
{
    crisisfilter::Rng rng(seed);
    Raster r(w, h, 3);
    const double gx = rng.uniform(-1, 1);
    const double gy = rng.uniform(-1, 1);
    struct Blob {
        double x, y, rad, amp;
    };
    std::vector<Blob> blobs;
    for (int i = 0; i < 6; ++i) {
        blobs.push_back({rng.uniform(0, w), rng.uniform(0, h), rng.uniform(3, w / 3.0), rng.uniform(-120, 120)});
    }
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            double v = 128 + 40 * (gx * x / w + gy * y / h);
            for (const auto& b : blobs) {
                const double d2 = (x - b.x) * (x - b.x) + (y - b.y) * (y - b.y);
                v += b.amp * std::exp(-d2 / (2 * b.rad * b.rad));
            }
            for (int c = 0; c < 3; ++c) {
                r.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(v + 10 * c, 0.0, 255.0));
            }
        }
    }
    return r;
}

inline LumaPlane luma(const Raster& img)
{
    LumaPlane p(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y) {
        for (int x = 0; x < img.width(); ++x) {
            p.at(x, y) = img.channels() == 1
                             ? img.at(x, y)
                             : 0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2);
        }
    }
    return p;
}

inline LumaPlane blur7(const LumaPlane& p)
{
    LumaPlane out(p.width, p.height);
    for (int y = 0; y < p.height; ++y) {
        for (int x = 0; x < p.width; ++x) {
            double sum = 0;
            int count = 0;
            for (int dy = -3; dy <= 3; ++dy) {
                for (int dx = -3; dx <= 3; ++dx) {
                    const int xx = x + dx;
                    const int yy = y + dy;
                    if (xx >= 0 && yy >= 0 && xx < p.width && yy < p.height) {
                        sum += p.at(xx, yy);
                        ++count;
                    }
                }
            }
            out.at(x, y) = sum / count;
        }
    }
    return out;
}

// Brute-force area overlap: every output pixel integrates every input pixel
// against its back-projected rectangle.
inline LumaPlane resize(const LumaPlane& p, int ow, int oh)
{
    LumaPlane out(ow, oh);
    const double sx = static_cast<double>(p.width) / ow;
    const double sy = static_cast<double>(p.height) / oh;
    for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
            const double x0 = ox * sx, x1 = (ox + 1) * sx;
            const double y0 = oy * sy, y1 = (oy + 1) * sy;
            double acc = 0;
            double area = 0;
            for (int iy = 0; iy < p.height; ++iy) {
                const double oyl = std::max(0.0, std::min(y1, iy + 1.0) - std::max(y0, static_cast<double>(iy)));
                if (oyl <= 0) {
                    continue;
                }
                for (int ix = 0; ix < p.width; ++ix) {
                    const double oxl = std::max(0.0, std::min(x1, ix + 1.0) - std::max(x0, static_cast<double>(ix)));
                    acc += oxl * oyl * p.at(ix, iy);
                    area += oxl * oyl;
                }
            }
            out.at(ox, oy) = acc / area;
        }
    }
    return out;
}

// Quadruple loop straight from the DCT-II definition.
inline DctGrid dct(const LumaPlane& f)
{
    constexpr int n = 32;
    DctGrid c{};
    for (int u = 0; u < n; ++u) {
        for (int v = 0; v < n; ++v) {
            double acc = 0;
            for (int y = 0; y < n; ++y) {
                for (int x = 0; x < n; ++x) {
                    acc += f.at(x, y) * std::cos((2 * y + 1) * u * std::numbers::pi / (2.0 * n)) *
                           std::cos((2 * x + 1) * v * std::numbers::pi / (2.0 * n));
                }
            }
            const double au = u == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
            const double av = v == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n);
            c[u][v] = au * av * acc;
        }
    }
    return c;
}

inline DctGrid dct_chain(const Raster& img)
{
    return dct(resize(blur7(luma(img)), 32, 32));
}

inline std::uint64_t phash(const Raster& img)
{
    const auto c = oracle::dct_chain(img);
    std::vector<double> block;
    for (int r = 1; r <= 8; ++r) {
        for (int k = 1; k <= 8; ++k) {
            block.push_back(c[r][k]);
        }
    }
    auto sorted = block;
    std::sort(sorted.begin(), sorted.end());
    const double median = (sorted[31] + sorted[32]) / 2;
    const double band = 1e-9 * std::max(1.0, std::abs(c[0][0]));
    std::uint64_t bits = 0;
    for (int k = 0; k < 64; ++k) {
        if (block[k] > median + band) {
            bits |= std::uint64_t{1} << k;
        }
    }
    return bits;
}

// Feature vector straight from its definition: oracle DCT block followed by
// per-channel 16-bin histograms, each bin counting values in [16b, 16b+16).
inline std::vector<double> features(const Raster& img)
{
    const auto c = oracle::dct_chain(img);
    std::vector<double> f;
    for (int r = 1; r <= 8; ++r) {
        for (int k = 1; k <= 8; ++k) {
            f.push_back(c[r][k]);
        }
    }
    const double pixels = static_cast<double>(img.width()) * img.height();
    for (int ch = 0; ch < 3; ++ch) {
        const int src = img.channels() == 1 ? 0 : ch;
        for (int b = 0; b < 16; ++b) {
            int count = 0;
            for (int y = 0; y < img.height(); ++y) {
                for (int x = 0; x < img.width(); ++x) {
                    const int v = img.at(x, y, src);
                    count += v >= 16 * b && v < 16 * b + 16;
                }
            }
            f.push_back(count / pixels);
        }
    }
    return f;
}


// Average precision as the mean, over positives, of precision at the
// positive's rank; ranks counted by direct comparison (O(n^2)).
inline double average_precision(const std::vector<std::uint8_t>& truth, const std::vector<double>& scores)
{
    const std::size_t n = truth.size();
    double sum = 0;
    int positives = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!truth[i]) {
            continue;
        }
        ++positives;
        int at_or_above = 0;
        int pos_at_or_above = 0;
        for (std::size_t j = 0; j < n; ++j) {
            const bool ahead = scores[j] > scores[i] || (scores[j] == scores[i] && j <= i);
            if (ahead) {
                ++at_or_above;
                pos_at_or_above += truth[j] ? 1 : 0;
            }
        }
        sum += static_cast<double>(pos_at_or_above) / at_or_above;
    }
    return sum / positives;
}

}  // namespace oracle
