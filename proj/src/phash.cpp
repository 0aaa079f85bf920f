#include "crisisfilter/phash.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace crisisfilter {

PerceptualHash hash_from_dct(const DctGrid& grid)
{
    std::array<double, 64> block{};
    for (int r = 0; r < 8; ++r) {
        for (int c = 0; c < 8; ++c) {
            block[8 * r + c] = grid[r + 1][c + 1];
        }
    }
    std::array<double, 64> sorted = block;
    std::sort(sorted.begin(), sorted.end());
    const double median = 0.5 * (sorted[31] + sorted[32]);
    const double tie_band = 1e-9 * std::max(1.0, std::abs(grid[0][0]));

    PerceptualHash h;
    for (int k = 0; k < 64; ++k) {
        if (block[k] > median + tie_band) {
            h.bits |= std::uint64_t{1} << k;
        }
    }
    return h;
}

PerceptualHash phash(const Raster& img)
{
    return hash_from_dct(dct_chain(img));
}

std::string to_hex(PerceptualHash h)
{
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h.bits));
    return buf;
}

std::optional<PerceptualHash> parse_hex(std::string_view text)
{
    if (text.empty() || text.size() > 16) {
        return std::nullopt;
    }
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value, 16);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        return std::nullopt;
    }
    return PerceptualHash{value};
}

}  // namespace crisisfilter
