#include "flexkit/hashing.hpp"

#include "flexkit/errors.hpp"

#include <openssl/evp.h>
#include <zlib.h>

#include <algorithm>
#include <cstring>

namespace flexkit {

std::string Digest128::hex() const
{
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out;
    out.reserve(32);
    for (auto b : bytes) {
        out.push_back(kDigits[b >> 4]);
        out.push_back(kDigits[b & 0xF]);
    }
    return out;
}

Digest128 Digest128::from_hex(std::string_view hex)
{
    if (hex.size() != 32) {
        throw FormatError("digest hex must have 32 characters");
    }
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        throw FormatError("invalid hex digit in digest");
    };
    Digest128 d;
    for (std::size_t i = 0; i < 16; ++i) {
        d.bytes[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
    }
    return d;
}

Hasher128::Hasher128() : ctx_(EVP_MD_CTX_new())
{
    if (ctx_ == nullptr || EVP_DigestInit_ex(static_cast<EVP_MD_CTX *>(ctx_), EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 initialisation failed");
    }
}

Hasher128::~Hasher128() { EVP_MD_CTX_free(static_cast<EVP_MD_CTX *>(ctx_)); }

Hasher128 &Hasher128::update(std::string_view data)
{
    EVP_DigestUpdate(static_cast<EVP_MD_CTX *>(ctx_), data.data(), data.size());
    return *this;
}

Hasher128 &Hasher128::update(std::span<const std::byte> data)
{
    EVP_DigestUpdate(static_cast<EVP_MD_CTX *>(ctx_), data.data(), data.size());
    return *this;
}

Hasher128 &Hasher128::field(std::string_view data)
{
    unsigned char len[8];
    std::uint64_t n = data.size();
    for (int i = 0; i < 8; ++i) {
        len[i] = static_cast<unsigned char>(n >> (8 * i));
    }
    EVP_DigestUpdate(static_cast<EVP_MD_CTX *>(ctx_), len, sizeof len);
    return update(data);
}

Digest128 Hasher128::finish()
{
    unsigned char full[EVP_MAX_MD_SIZE];
    unsigned int n = 0;
    EVP_DigestFinal_ex(static_cast<EVP_MD_CTX *>(ctx_), full, &n);
    Digest128 d;
    std::memcpy(d.bytes.data(), full, d.bytes.size());
    return d;
}

Digest128 digest128(std::initializer_list<std::string_view> fields)
{
    Hasher128 h;
    for (auto f : fields) {
        h.field(f);
    }
    return h.finish();
}

std::uint32_t crc32(std::span<const std::byte> data) noexcept
{
    uLong crc = ::crc32(0L, Z_NULL, 0);
    const auto *p = reinterpret_cast<const Bytef *>(data.data());
    std::size_t left = data.size();
    // zlib takes a uInt length
    while (left > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
        crc = ::crc32(crc, p, chunk);
        p += chunk;
        left -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

} // namespace flexkit
