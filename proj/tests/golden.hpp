#pragma once

#include <cmath>
#include <cstdint>

#include "crisisfilter/image.hpp"
#include "crisisfilter/rng.hpp"

namespace golden {

// 64x64 RGB gradient with two seeded sinusoids; the frozen hash and
// feature vectors in the tests refer to this image.
inline crisisfilter::Raster gradient_image(std::uint64_t seed = 2017)
{
    crisisfilter::Rng rng(seed);
    const double fx = rng.uniform(1.0, 4.0);
    const double fy = rng.uniform(1.0, 4.0);
    const double px = rng.uniform(0.0, 6.283185307179586);
    const double py = rng.uniform(0.0, 6.283185307179586);
    crisisfilter::Raster img(64, 64, 3);
    for (int y = 0; y < 64; ++y) {
        for (int x = 0; x < 64; ++x) {
            const double base = 2.0 * x + 1.0 * y;
            const double wave = 40.0 * std::sin(fx * x / 10.0 + px) + 30.0 * std::cos(fy * y / 10.0 + py);
            img.at(x, y, 0) = static_cast<std::uint8_t>(std::lround(std::fmin(255.0, std::fmax(0.0, base * 0.8 + wave))));
            img.at(x, y, 1) = static_cast<std::uint8_t>(std::lround(std::fmin(255.0, std::fmax(0.0, 60.0 + base * 0.5 - wave))));
            img.at(x, y, 2) = static_cast<std::uint8_t>((x * 3 + y * 5) % 256);
        }
    }
    return img;
}

}  // namespace golden
