#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace crisisfilter::detail {

template <typename T>
void put_le(std::vector<std::uint8_t>& out, T value)
{
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        out.push_back(static_cast<std::uint8_t>(static_cast<std::uint64_t>(value) >> (8 * i)));
    }
}

inline void put_f64(std::vector<std::uint8_t>& out, double value)
{
    put_le(out, std::bit_cast<std::uint64_t>(value));
}

inline void put_str16(std::vector<std::uint8_t>& out, const std::string& s)
{
    put_le(out, static_cast<std::uint16_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
}

/// Little-endian reader; `Error` must be constructible from (message, byte offset).
template <typename Error>
class ByteCursor {
public:
    explicit ByteCursor(std::span<const std::uint8_t> b) : bytes_(b) {}

    template <typename T>
    T get_le(const char* what)
    {
        need(sizeof(T), what);
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        }
        pos_ += sizeof(T);
        return static_cast<T>(v);
    }

    double get_f64(const char* what) { return std::bit_cast<double>(get_le<std::uint64_t>(what)); }

    std::string get_string(std::size_t n, const char* what)
    {
        need(n, what);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    std::string get_str16(const char* what) { return get_string(get_le<std::uint16_t>(what), what); }

    void need(std::size_t n, const char* what) const
    {
        if (bytes_.size() - pos_ < n) {
            throw Error(std::string("truncated ") + what, pos_);
        }
    }

    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return bytes_.size() - pos_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace crisisfilter::detail
