#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace kintsugi {

using Bytes = std::vector<uint8_t>;
using ByteSpan = std::span<const uint8_t>;

inline Bytes to_bytes(std::string_view s) { return Bytes(s.begin(), s.end()); }

inline std::string to_string(ByteSpan b) { return std::string(b.begin(), b.end()); }

inline void append(Bytes& out, ByteSpan more) { out.insert(out.end(), more.begin(), more.end()); }

std::string hex_encode(ByteSpan data);
Bytes hex_decode(std::string_view hex); // throws Errc::malformed_message on bad input

// Constant-time comparison for key material; length mismatch is not secret.
bool equal_bytes(ByteSpan a, ByteSpan b);

// Best-effort zeroization of sensitive buffers.
void wipe(Bytes& b);
void wipe(std::span<uint8_t> b);

inline void store_le32(uint8_t* p, uint32_t v) {
    p[0] = uint8_t(v);
    p[1] = uint8_t(v >> 8);
    p[2] = uint8_t(v >> 16);
    p[3] = uint8_t(v >> 24);
}

inline void store_le64(uint8_t* p, uint64_t v) {
    for (int i = 0; i < 8; ++i) p[i] = uint8_t(v >> (8 * i));
}

inline uint32_t load_le32(const uint8_t* p) {
    return uint32_t(p[0]) | uint32_t(p[1]) << 8 | uint32_t(p[2]) << 16 | uint32_t(p[3]) << 24;
}

inline uint64_t load_le64(const uint8_t* p) {
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = v << 8 | p[i];
    return v;
}

inline uint32_t load_le32(ByteSpan s) { return load_le32(s.data()); }
inline uint64_t load_le64(ByteSpan s) { return load_le64(s.data()); }

inline void append_le32(Bytes& out, uint32_t v) {
    size_t at = out.size();
    out.resize(at + 4);
    store_le32(out.data() + at, v);
}

inline void append_le64(Bytes& out, uint64_t v) {
    size_t at = out.size();
    out.resize(at + 8);
    store_le64(out.data() + at, v);
}

} // namespace kintsugi
