#include "kintsugi/signing.hpp"

#include <sodium.h>

#include "kintsugi/errors.hpp"
#include "kintsugi/hash.hpp"
#include "sodium_guard.hpp"

namespace kintsugi {

static_assert(crypto_sign_PUBLICKEYBYTES == 32);
static_assert(crypto_sign_SECRETKEYBYTES == 64);
static_assert(crypto_sign_BYTES == 64);
static_assert(crypto_box_PUBLICKEYBYTES == 32);
static_assert(crypto_box_SECRETKEYBYTES == 32);

SigningKeypair SigningKeypair::generate(Rng& rng) {
    ensure_sodium();
    std::array<uint8_t, crypto_sign_SEEDBYTES> seed{};
    rng.fill(seed);
    SigningKeypair kp;
    crypto_sign_seed_keypair(kp.pk.data(), kp.sk.data(), seed.data());
    wipe(seed);
    return kp;
}

Signature sign_message(const SecretKey& sk, std::string_view context,
                       std::initializer_list<ByteSpan> parts) {
    auto digest = hash512(context, parts);
    Signature sig{};
    crypto_sign_detached(sig.data(), nullptr, digest.data(), digest.size(), sk.data());
    return sig;
}

bool verify_message(const PublicKey& pk, std::string_view context,
                    std::initializer_list<ByteSpan> parts, const Signature& sig) {
    auto digest = hash512(context, parts);
    return crypto_sign_verify_detached(sig.data(), digest.data(), digest.size(), pk.data()) == 0;
}

BoxKeypair BoxKeypair::generate(Rng& rng) {
    ensure_sodium();
    std::array<uint8_t, crypto_box_SEEDBYTES> seed{};
    rng.fill(seed);
    BoxKeypair kp;
    crypto_box_seed_keypair(kp.pk.data(), kp.sk.data(), seed.data());
    wipe(seed);
    return kp;
}

namespace {

std::array<uint8_t, crypto_box_NONCEBYTES> sealed_nonce(const uint8_t* epk, const uint8_t* rpk) {
    std::array<uint8_t, crypto_box_NONCEBYTES> nonce{};
    crypto_generichash_state st;
    crypto_generichash_init(&st, nullptr, 0, nonce.size());
    crypto_generichash_update(&st, epk, crypto_box_PUBLICKEYBYTES);
    crypto_generichash_update(&st, rpk, crypto_box_PUBLICKEYBYTES);
    crypto_generichash_final(&st, nonce.data(), nonce.size());
    return nonce;
}

} // namespace

Bytes seal_to(const BoxPublicKey& recipient, ByteSpan plaintext, Rng& rng) {
    ensure_sodium();
    std::array<uint8_t, crypto_box_SEEDBYTES> seed{};
    rng.fill(seed);
    BoxPublicKey epk{};
    BoxSecretKey esk{};
    crypto_box_seed_keypair(epk.data(), esk.data(), seed.data());
    wipe(seed);

    auto nonce = sealed_nonce(epk.data(), recipient.data());
    Bytes out(epk.size() + plaintext.size() + crypto_box_MACBYTES);
    std::copy(epk.begin(), epk.end(), out.begin());
    if (crypto_box_easy(out.data() + epk.size(), plaintext.data(), plaintext.size(), nonce.data(),
                        recipient.data(), esk.data()) != 0)
        fail(Errc::internal, "box seal failed");
    wipe(esk);
    return out;
}

Bytes open_sealed(const BoxKeypair& recipient, ByteSpan sealed) {
    ensure_sodium();
    if (sealed.size() < crypto_box_PUBLICKEYBYTES + crypto_box_MACBYTES)
        fail(Errc::decryption_failed, "sealed box truncated");
    const uint8_t* epk = sealed.data();
    auto nonce = sealed_nonce(epk, recipient.pk.data());
    Bytes plaintext(sealed.size() - crypto_box_PUBLICKEYBYTES - crypto_box_MACBYTES);
    if (crypto_box_open_easy(plaintext.data(), sealed.data() + crypto_box_PUBLICKEYBYTES,
                             sealed.size() - crypto_box_PUBLICKEYBYTES, nonce.data(), epk,
                             recipient.sk.data()) != 0)
        fail(Errc::decryption_failed, "sealed box authentication failed");
    return plaintext;
}

} // namespace kintsugi
