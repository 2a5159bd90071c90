#include "kintsugi/hash.hpp"

#include <sodium.h>

#include "kintsugi/errors.hpp"

namespace kintsugi {

std::array<uint8_t, 64> hash512(std::string_view domain_tag, std::initializer_list<ByteSpan> parts) {
    if (domain_tag.size() > 255) fail(Errc::internal, "domain tag too long");
    crypto_hash_sha512_state st;
    crypto_hash_sha512_init(&st);
    uint8_t tag_len = uint8_t(domain_tag.size());
    crypto_hash_sha512_update(&st, &tag_len, 1);
    crypto_hash_sha512_update(&st, reinterpret_cast<const uint8_t*>(domain_tag.data()), domain_tag.size());
    for (ByteSpan part : parts) {
        if (!part.empty()) crypto_hash_sha512_update(&st, part.data(), part.size());
    }
    std::array<uint8_t, 64> out;
    crypto_hash_sha512_final(&st, out.data());
    return out;
}

} // namespace kintsugi
