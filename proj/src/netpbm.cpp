#include "crisisfilter/netpbm.hpp"

#include <cctype>
#include <fstream>
#include <iterator>

namespace crisisfilter {

namespace {

class HeaderReader {
public:
    explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    void skip_space_and_comments()
    {
        while (pos_ < bytes_.size()) {
            const auto ch = bytes_[pos_];
            if (ch == '#') {
                while (pos_ < bytes_.size() && bytes_[pos_] != '\n') {
                    ++pos_;
                }
            } else if (std::isspace(ch)) {
                ++pos_;
            } else {
                break;
            }
        }
    }

    long read_uint(const char* what)
    {
        skip_space_and_comments();
        long value = 0;
        std::size_t digits = 0;
        while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
            value = value * 10 + (bytes_[pos_] - '0');
            if (value > 1'000'000) {
                throw DecodeError(std::string("netpbm: ") + what + " out of range");
            }
            ++pos_;
            ++digits;
        }
        if (digits == 0) {
            throw DecodeError(std::string("netpbm: expected ") + what + " at byte " + std::to_string(pos_));
        }
        return value;
    }

    // Exactly one whitespace byte separates maxval from the raster.
    void consume_single_whitespace()
    {
        if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
            throw DecodeError("netpbm: missing whitespace after maxval");
        }
        ++pos_;
    }

    std::size_t pos() const { return pos_; }
    void advance(std::size_t n) { pos_ += n; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

Raster decode_netpbm(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6')) {
        throw DecodeError("netpbm: not a binary PGM/PPM file");
    }
    const int channels = bytes[1] == '5' ? 1 : 3;
    HeaderReader reader(bytes);
    reader.advance(2);
    const long width = reader.read_uint("width");
    const long height = reader.read_uint("height");
    const long maxval = reader.read_uint("maxval");
    if (width < 1 || height < 1) {
        throw DecodeError("netpbm: zero image dimension");
    }
    if (maxval != 255) {
        throw DecodeError("netpbm: unsupported maxval " + std::to_string(maxval) + " (only 255)");
    }
    reader.consume_single_whitespace();

    const std::size_t need = static_cast<std::size_t>(width) * height * channels;
    const std::size_t have = bytes.size() - reader.pos();
    if (have < need) {
        throw DecodeError("netpbm: truncated raster, expected " + std::to_string(need) + " bytes, found " +
                          std::to_string(have));
    }
    const auto first = bytes.begin() + static_cast<std::ptrdiff_t>(reader.pos());
    std::vector<std::uint8_t> data(first, first + static_cast<std::ptrdiff_t>(need));
    return Raster(static_cast<int>(width), static_cast<int>(height), channels, std::move(data));
}

std::vector<std::uint8_t> encode_netpbm(const Raster& img)
{
    const std::string header = std::string(img.channels() == 1 ? "P5" : "P6") + "\n" +
                               std::to_string(img.width()) + " " + std::to_string(img.height()) + "\n255\n";
    std::vector<std::uint8_t> out(header.begin(), header.end());
    out.insert(out.end(), img.data().begin(), img.data().end());
    return out;
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Raster read_netpbm(const std::filesystem::path& path)
{
    return decode_netpbm(read_file_bytes(path));
}

void write_netpbm(const std::filesystem::path& path, const Raster& img)
{
    const auto bytes = encode_netpbm(img);
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot write " + path.string());
    }
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace crisisfilter
