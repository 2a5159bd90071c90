#pragma once

#include <map>
#include <optional>
#include <string>

#include "kintsugi/signing.hpp"
#include "kintsugi/wire.hpp"

namespace kintsugi {

// Key-pin lattice per username: unpinned < pinned(K) < forked. "forked" is
// absorbing and records that replicas saw conflicting first-use keys; a forked
// name serves no entry and accepts no further writes.
enum class PinState : uint8_t {
    pinned = 1,
    forked = 2,
};

struct Pin {
    PinState state = PinState::pinned;
    PublicKey key{}; // meaningful only when pinned

    bool operator==(const Pin&) const = default;
};

struct DirectoryStore {
    std::map<std::string, Pin> pins;
    std::map<std::string, DirectoryEntry> entries;

    bool operator==(const DirectoryStore&) const = default;
};

// Structural checks shared by put and merge: signature, distinct committee
// indices (all nonzero), |committee| >= t+1.
bool entry_well_formed(const DirectoryEntry& entry);

// TOFU write path. First write pins the key; later writes must be signed by
// the pinned key and strictly increase the version.
void put_entry(DirectoryStore& store, const DirectoryEntry& entry);

// Throws NotFound for unknown or forked usernames.
const DirectoryEntry& get_entry(const DirectoryStore& store, const std::string& username);
const DirectoryEntry* find_entry(const DirectoryStore& store, const std::string& username);

// Commutative, associative, idempotent replica merge. Per username: pins join
// in the lattice, then the highest-version entry passing signature+pin checks
// wins (canonical bytes break version ties deterministically).
DirectoryStore merge_replicas(const DirectoryStore& a, const DirectoryStore& b);

Bytes encode_store(const DirectoryStore& store);
DirectoryStore decode_store(ByteSpan in); // throws CorruptState

} // namespace kintsugi
