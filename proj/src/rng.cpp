#include "kintsugi/rng.hpp"

#include <cstring>
#include <sodium.h>

#include "kintsugi/errors.hpp"
#include "kintsugi/hash.hpp"

namespace kintsugi {

uint64_t Rng::next_u64() {
    std::array<uint8_t, 8> buf;
    fill(buf);
    uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = v << 8 | buf[i];
    return v;
}

uint64_t Rng::below(uint64_t bound) {
    if (bound == 0) fail(Errc::internal, "below(0)");
    // Rejection sampling over the widest multiple of bound.
    const uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    uint64_t v;
    do {
        v = next_u64();
    } while (v >= limit);
    return v % bound;
}

Bytes Rng::bytes(size_t n) {
    Bytes out(n);
    fill(out);
    return out;
}

void SystemRng::fill(std::span<uint8_t> out) {
    if (!out.empty()) randombytes_buf(out.data(), out.size());
}

DeterministicRng::DeterministicRng(uint64_t seed, std::string_view label) {
    std::array<uint8_t, 8> seed_le;
    store_le64(seed_le.data(), seed);
    auto h = hash512("kintsugi/rng", {ByteSpan(seed_le), to_bytes(label)});
    std::memcpy(key_.data(), h.data(), key_.size());
}

void DeterministicRng::fill(std::span<uint8_t> out) {
    size_t pos = 0;
    while (pos < out.size()) {
        if (avail_ == 0) {
            uint8_t nonce[8];
            store_le64(nonce, counter_++);
            std::memset(block_.data(), 0, block_.size());
            crypto_stream_chacha20(block_.data(), block_.size(), nonce, key_.data());
            avail_ = block_.size();
        }
        size_t take = std::min(avail_, out.size() - pos);
        std::memcpy(out.data() + pos, block_.data() + (block_.size() - avail_), take);
        avail_ -= take;
        pos += take;
    }
}

} // namespace kintsugi
