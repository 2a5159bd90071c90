#include "kintsugi/oprf.hpp"

#include <sodium.h>

#include <set>

#include "kintsugi/errors.hpp"
#include "kintsugi/hash.hpp"
#include "sodium_guard.hpp"

namespace kintsugi {

std::pair<BlindingState, std::vector<BlindedElement>>
blind(const Group& g, ByteSpan password, const std::vector<uint32_t>& node_indices, Rng& rng) {
    if (password.empty()) fail(Errc::malformed_message, "empty password");
    BlindingState state;
    state.password_point = g.hash_to_group(password, kDomainPassword);
    std::vector<BlindedElement> out;
    out.reserve(node_indices.size());
    for (uint32_t i : node_indices) {
        if (i == 0) fail(Errc::duplicate_index, "index 0 is reserved for the secret");
        if (state.blinding.count(i)) fail(Errc::duplicate_index, "index " + std::to_string(i) + " repeated");
        Scalar r = g.scalar_random(rng);
        while (g.scalar_is_zero(r)) r = g.scalar_random(rng);
        state.blinding.emplace(i, r);
        out.push_back(BlindedElement{i, g.mul(r, state.password_point)});
    }
    return {std::move(state), std::move(out)};
}

EvaluatedElement evaluate(const Group& g, const Share& share, const BlindedElement& blinded) {
    return EvaluatedElement{blinded.index, share.epoch, g.mul(share.value, blinded.element)};
}

Element unblind_and_combine(const Group& g, const BlindingState& state,
                            const std::vector<EvaluatedElement>& responses, uint32_t threshold) {
    const size_t quorum = size_t(threshold) + 1;
    if (responses.size() < quorum)
        fail(Errc::insufficient_responses,
             "need " + std::to_string(quorum) + " responses, got " + std::to_string(responses.size()));

    std::set<uint32_t> seen;
    std::vector<uint32_t> indices;
    std::vector<Element> unblinded;
    for (const auto& resp : responses) {
        if (resp.epoch != responses.front().epoch)
            fail(Errc::epoch_mismatch, "responses span epochs " + std::to_string(responses.front().epoch) +
                                           " and " + std::to_string(resp.epoch));
        if (!seen.insert(resp.index).second)
            fail(Errc::duplicate_index, "two responses from index " + std::to_string(resp.index));
        auto it = state.blinding.find(resp.index);
        if (it == state.blinding.end())
            fail(Errc::unknown_index, "no blinding scalar for index " + std::to_string(resp.index));
        if (indices.size() < quorum) {
            indices.push_back(resp.index);
            unblinded.push_back(g.mul(g.scalar_invert(it->second), resp.element));
        }
    }

    auto lambda = lagrange_at_zero(g, indices);
    Element acc = g.identity();
    for (size_t k = 0; k < indices.size(); ++k) acc = g.add(acc, g.mul(lambda[k], unblinded[k]));
    return acc;
}

BackupKey derive_backup_key(const Group& g, const Element& oprf_output) {
    auto digest = hash512(kDomainKdf, {g.encode_element(oprf_output)});
    BackupKey key{};
    std::copy(digest.begin(), digest.begin() + key.size(), key.begin());
    return key;
}

static_assert(crypto_aead_xchacha20poly1305_ietf_NPUBBYTES == 24);
static_assert(crypto_aead_xchacha20poly1305_ietf_KEYBYTES == 32);

EncryptedBackup seal_backup(const BackupKey& key, ByteSpan plaintext, ByteSpan username, Rng& rng) {
    ensure_sodium();
    EncryptedBackup backup;
    rng.fill(backup.nonce);
    backup.ciphertext.resize(plaintext.size() + crypto_aead_xchacha20poly1305_ietf_ABYTES);
    unsigned long long clen = 0;
    crypto_aead_xchacha20poly1305_ietf_encrypt(backup.ciphertext.data(), &clen, plaintext.data(),
                                               plaintext.size(), username.data(), username.size(),
                                               nullptr, backup.nonce.data(), key.data());
    backup.ciphertext.resize(clen);
    return backup;
}

Bytes open_backup(const BackupKey& key, const EncryptedBackup& backup, ByteSpan username) {
    ensure_sodium();
    if (backup.ciphertext.size() < crypto_aead_xchacha20poly1305_ietf_ABYTES)
        fail(Errc::decryption_failed, "ciphertext shorter than the tag");
    Bytes plaintext(backup.ciphertext.size() - crypto_aead_xchacha20poly1305_ietf_ABYTES);
    unsigned long long mlen = 0;
    int rc = crypto_aead_xchacha20poly1305_ietf_decrypt(
        plaintext.data(), &mlen, nullptr, backup.ciphertext.data(), backup.ciphertext.size(),
        username.data(), username.size(), backup.nonce.data(), key.data());
    if (rc != 0) fail(Errc::decryption_failed, "backup authentication failed");
    plaintext.resize(mlen);
    return plaintext;
}

Bytes EncryptedBackup::encode() const {
    Bytes out;
    out.reserve(nonce.size() + 4 + ciphertext.size());
    append(out, ByteSpan(nonce.data(), nonce.size()));
    append_le32(out, static_cast<uint32_t>(ciphertext.size()));
    append(out, ciphertext);
    return out;
}

EncryptedBackup EncryptedBackup::decode(ByteSpan in) {
    EncryptedBackup backup;
    if (in.size() < backup.nonce.size() + 4)
        fail(Errc::malformed_message, "encrypted backup truncated");
    std::copy(in.begin(), in.begin() + backup.nonce.size(), backup.nonce.begin());
    uint32_t len = load_le32(in.subspan(backup.nonce.size(), 4));
    if (in.size() != backup.nonce.size() + 4 + len)
        fail(Errc::malformed_message, "encrypted backup length mismatch");
    backup.ciphertext.assign(in.begin() + backup.nonce.size() + 4, in.end());
    return backup;
}

} // namespace kintsugi
