#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>

namespace flexkit {

/// 128-bit digest (truncated SHA-256). Used for build ids, config fingerprints and cache keys.
struct Digest128 {
    std::array<std::uint8_t, 16> bytes{};

    [[nodiscard]] std::string hex() const;
    [[nodiscard]] static Digest128 from_hex(std::string_view hex);

    friend bool operator==(const Digest128 &, const Digest128 &) = default;
};

/// Incremental SHA-256 truncated to 128 bits.
class Hasher128 {
public:
    Hasher128();
    ~Hasher128();
    Hasher128(const Hasher128 &) = delete;
    Hasher128 &operator=(const Hasher128 &) = delete;

    Hasher128 &update(std::string_view data);
    Hasher128 &update(std::span<const std::byte> data);
    /// Length-prefixed update, so that ("ab","c") and ("a","bc") hash differently.
    Hasher128 &field(std::string_view data);
    [[nodiscard]] Digest128 finish();

private:
    void *ctx_;
};

[[nodiscard]] Digest128 digest128(std::initializer_list<std::string_view> fields);

[[nodiscard]] std::uint32_t crc32(std::span<const std::byte> data) noexcept;

/// 64-bit FNV-1a; stable across platforms, used by the feature-hashing encoder.
[[nodiscard]] constexpr std::uint64_t fnv1a64(std::string_view s,
                                              std::uint64_t basis = 0xcbf29ce484222325ULL) noexcept
{
    std::uint64_t h = basis;
    for (char c : s) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// SplitMix64 finalizer.
[[nodiscard]] constexpr std::uint64_t mix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace flexkit
