#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <string_view>

#include "kintsugi/bytes.hpp"
#include "kintsugi/rng.hpp"

namespace kintsugi {

using PublicKey = std::array<uint8_t, 32>;
using Signature = std::array<uint8_t, 64>;
using SecretKey = std::array<uint8_t, 64>;

struct SigningKeypair {
    PublicKey pk{};
    SecretKey sk{};

    static SigningKeypair generate(Rng& rng);
};

// Signatures cover hash512(context, parts); the context tag keeps signatures
// from one message family from validating as another.
Signature sign_message(const SecretKey& sk, std::string_view context,
                       std::initializer_list<ByteSpan> parts);
bool verify_message(const PublicKey& pk, std::string_view context,
                    std::initializer_list<ByteSpan> parts, const Signature& sig);

using BoxPublicKey = std::array<uint8_t, 32>;
using BoxSecretKey = std::array<uint8_t, 32>;

struct BoxKeypair {
    BoxPublicKey pk{};
    BoxSecretKey sk{};

    static BoxKeypair generate(Rng& rng);
};

// Anonymous sealed box: ephemeral_pk(32) || ciphertext+tag, nonce derived
// from both public keys. The ephemeral key comes from the caller's rng so
// simulator runs stay reproducible.
Bytes seal_to(const BoxPublicKey& recipient, ByteSpan plaintext, Rng& rng);
Bytes open_sealed(const BoxKeypair& recipient, ByteSpan sealed); // throws DecryptionFailed

} // namespace kintsugi
