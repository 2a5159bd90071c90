#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <vector>

#include "kintsugi/bytes.hpp"
#include "kintsugi/group.hpp"
#include "kintsugi/rng.hpp"
#include "kintsugi/sharing.hpp"

namespace kintsugi {

// Per-recovery blinding session. Holds one nonzero scalar per contacted node;
// never reused across attempts.
struct BlindingState {
    std::map<uint32_t, Scalar> blinding; // node index -> r_i, all nonzero
    Element password_point;              // P = hash_to_group(password)
};

struct BlindedElement {
    uint32_t index = 0;
    Element element; // r_i * P
};

struct EvaluatedElement {
    uint32_t index = 0;
    uint64_t epoch = 0;
    Element element; // s_i * r_i * P
};

// Wire form: nonce(24) || u32-LE ciphertext length || ciphertext+tag.
// The username is bound as associated data but never serialized here.
struct EncryptedBackup {
    std::array<uint8_t, 24> nonce{};
    Bytes ciphertext; // includes the 16-byte tag

    Bytes encode() const;
    static EncryptedBackup decode(ByteSpan in);

    bool operator==(const EncryptedBackup&) const = default;
};

using BackupKey = std::array<uint8_t, 32>;

std::pair<BlindingState, std::vector<BlindedElement>>
blind(const Group& g, ByteSpan password, const std::vector<uint32_t>& node_indices, Rng& rng);

EvaluatedElement evaluate(const Group& g, const Share& share, const BlindedElement& blinded);

// Needs threshold as context: the caller learns t from the responses' origin
// (directory entry or recovery response) before it can size the quorum.
Element unblind_and_combine(const Group& g, const BlindingState& state,
                            const std::vector<EvaluatedElement>& responses, uint32_t threshold);

BackupKey derive_backup_key(const Group& g, const Element& oprf_output);

EncryptedBackup seal_backup(const BackupKey& key, ByteSpan plaintext, ByteSpan username, Rng& rng);
Bytes open_backup(const BackupKey& key, const EncryptedBackup& backup, ByteSpan username);

} // namespace kintsugi
