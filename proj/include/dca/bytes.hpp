// Copyright (c) 2026 The dcasim developers
// Distributed under the MIT software license, see the accompanying
// file LICENSE or http://www.opensource.org/licenses/mit-license.php.

#ifndef DCA_BYTES_HPP
#define DCA_BYTES_HPP

#include <array>
#include <compare>
#include <cstdint>
#include <cstring>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dca {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

inline Bytes to_bytes(std::string_view s) {
    return Bytes(s.begin(), s.end());
}

inline ByteView view_of(const Bytes& b) { return ByteView(b.data(), b.size()); }

/// 32-octet digest. Value type, ordered so it can key maps.
struct Digest {
    std::array<std::uint8_t, 32> bytes{};

    auto operator<=>(const Digest&) const = default;

    bool is_zero() const {
        for (auto b : bytes)
            if (b != 0) return false;
        return true;
    }

    std::string hex() const;
    std::string short_hex(std::size_t n = 8) const { return hex().substr(0, n); }
};

inline std::string hex_encode(ByteView data) {
    static const char* digits = "0123456789abcdef";
    std::string out;
    out.reserve(data.size() * 2);
    for (auto b : data) {
        out.push_back(digits[b >> 4]);
        out.push_back(digits[b & 0x0f]);
    }
    return out;
}

inline Bytes hex_decode(std::string_view s) {
    auto nibble = [](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        return -1;
    };
    if (s.size() % 2 != 0) throw std::invalid_argument("hex_decode: odd length");
    Bytes out(s.size() / 2);
    for (std::size_t i = 0; i < out.size(); ++i) {
        int hi = nibble(s[2 * i]), lo = nibble(s[2 * i + 1]);
        if (hi < 0 || lo < 0) throw std::invalid_argument("hex_decode: bad digit");
        out[i] = static_cast<std::uint8_t>((hi << 4) | lo);
    }
    return out;
}

inline std::string Digest::hex() const {
    return hex_encode(ByteView(bytes.data(), bytes.size()));
}

inline Digest digest_from_hex(std::string_view s) {
    Bytes raw = hex_decode(s);
    if (raw.size() != 32) throw std::invalid_argument("digest_from_hex: need 32 octets");
    Digest d;
    std::memcpy(d.bytes.data(), raw.data(), 32);
    return d;
}

/// Big-endian integer read of the first 8 octets.
inline std::uint64_t be64_prefix(const Digest& d) {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | d.bytes[static_cast<std::size_t>(i)];
    return v;
}

} // namespace dca

#endif // DCA_BYTES_HPP
