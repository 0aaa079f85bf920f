#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "crisisfilter/image.hpp"

namespace crisisfilter {

class DecodeError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Binary PGM (P5) / PPM (P6) with maxval 255. Header comments are accepted.
Raster decode_netpbm(std::span<const std::uint8_t> bytes);

/// P5 for single-channel rasters, P6 for RGB.
std::vector<std::uint8_t> encode_netpbm(const Raster& img);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
Raster read_netpbm(const std::filesystem::path& path);
void write_netpbm(const std::filesystem::path& path, const Raster& img);

}  // namespace crisisfilter
