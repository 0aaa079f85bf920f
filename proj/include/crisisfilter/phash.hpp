#pragma once

#include <bit>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "crisisfilter/image.hpp"

namespace crisisfilter {

/// 64-bit DCT fingerprint. Bit k = 8*r + c (LSB is k = 0) is set when DCT
/// coefficient (r+1, c+1) lies strictly above the median of the 8x8 block.
struct PerceptualHash {
    std::uint64_t bits = 0;

    friend constexpr bool operator==(PerceptualHash, PerceptualHash) = default;
    friend constexpr auto operator<=>(PerceptualHash, PerceptualHash) = default;
};

inline constexpr int hamming(PerceptualHash a, PerceptualHash b)
{
    return std::popcount(a.bits ^ b.bits);
}

/// Binarize the low-frequency block of a DCT grid. Coefficients within a
/// relative 1e-9 of the DC magnitude above the median count as ties, so
/// floating-point residue on flat images does not set bits.
PerceptualHash hash_from_dct(const DctGrid& grid);

PerceptualHash phash(const Raster& img);

/// 16 lowercase hex digits, zero padded.
std::string to_hex(PerceptualHash h);
std::optional<PerceptualHash> parse_hex(std::string_view text);

}  // namespace crisisfilter
