#pragma once

// Fixed little-endian encoding helpers shared by the on-disk formats.

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>

#include "flexkit/errors.hpp"

namespace flexkit::detail {

template <typename T>
concept LeScalar = std::is_arithmetic_v<T> && (sizeof(T) == 1 || sizeof(T) == 2 || sizeof(T) == 4 || sizeof(T) == 8);

template <LeScalar T>
constexpr auto to_unsigned_bits(T value) noexcept
{
    if constexpr (sizeof(T) == 1) {
        return std::bit_cast<std::uint8_t>(value);
    } else if constexpr (sizeof(T) == 2) {
        return std::bit_cast<std::uint16_t>(value);
    } else if constexpr (sizeof(T) == 4) {
        return std::bit_cast<std::uint32_t>(value);
    } else {
        return std::bit_cast<std::uint64_t>(value);
    }
}

template <LeScalar T>
void put_le(std::string &out, T value)
{
    auto bits = to_unsigned_bits(value);
    char buf[sizeof(T)];
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        buf[i] = static_cast<char>((bits >> (8 * i)) & 0xFFu);
    }
    out.append(buf, sizeof(T));
}

template <LeScalar T>
[[nodiscard]] T load_le(const std::byte *src) noexcept
{
    using U = decltype(to_unsigned_bits(T{}));
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        bits |= static_cast<U>(static_cast<U>(std::to_integer<std::uint8_t>(src[i])) << (8 * i));
    }
    return std::bit_cast<T>(bits);
}

template <LeScalar T>
void store_le(std::byte *dst, T value) noexcept
{
    auto bits = to_unsigned_bits(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        dst[i] = static_cast<std::byte>((bits >> (8 * i)) & 0xFFu);
    }
}

/// Bounds-checked sequential reader over a byte span.
class ByteCursor {
public:
    explicit ByteCursor(std::span<const std::byte> bytes, std::size_t pos = 0) noexcept
        : bytes_(bytes), pos_(pos)
    {
    }

    template <LeScalar T>
    T read()
    {
        require(sizeof(T));
        T v = load_le<T>(bytes_.data() + pos_);
        pos_ += sizeof(T);
        return v;
    }

    std::string_view read_bytes(std::size_t n)
    {
        require(n);
        std::string_view v(reinterpret_cast<const char *>(bytes_.data() + pos_), n);
        pos_ += n;
        return v;
    }

    void seek(std::size_t pos)
    {
        if (pos > bytes_.size()) {
            throw FormatError("seek past end of buffer");
        }
        pos_ = pos;
    }

    [[nodiscard]] std::size_t pos() const noexcept { return pos_; }
    [[nodiscard]] std::size_t remaining() const noexcept { return bytes_.size() - pos_; }

private:
    void require(std::size_t n) const
    {
        if (n > bytes_.size() - pos_) {
            throw FormatError("unexpected end of data");
        }
    }

    std::span<const std::byte> bytes_;
    std::size_t pos_;
};

inline constexpr std::size_t kPageSize = 4096;

[[nodiscard]] constexpr std::uint64_t align_up(std::uint64_t v, std::uint64_t a) noexcept
{
    return (v + a - 1) / a * a;
}

} // namespace flexkit::detail
