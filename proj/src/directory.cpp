#include "kintsugi/directory.hpp"

#include <set>

#include "kintsugi/errors.hpp"

namespace kintsugi {

bool entry_well_formed(const DirectoryEntry& entry) {
    if (entry.username.empty() || entry.committee.empty()) return false;
    if (entry.committee.size() < size_t(entry.threshold) + 1) return false;
    std::set<uint32_t> indices;
    for (const auto& m : entry.committee) {
        if (m.index == 0) return false;
        if (!indices.insert(m.index).second) return false;
    }
    return entry.verify();
}

void put_entry(DirectoryStore& store, const DirectoryEntry& entry) {
    auto pin = store.pins.find(entry.username);
    if (pin != store.pins.end()) {
        if (pin->second.state == PinState::forked)
            fail(Errc::key_mismatch, "username has conflicting pinned keys");
        if (pin->second.key != entry.user_pubkey)
            fail(Errc::key_mismatch, "entry key differs from pinned key");
    }
    if (!entry_well_formed(entry)) fail(Errc::bad_signature, "entry failed signature or shape checks");
    auto cur = store.entries.find(entry.username);
    if (cur != store.entries.end() && entry.version <= cur->second.version)
        fail(Errc::stale_version, "version " + std::to_string(entry.version) +
                                      " does not exceed stored " + std::to_string(cur->second.version));
    store.pins.insert_or_assign(entry.username, Pin{PinState::pinned, entry.user_pubkey});
    store.entries.insert_or_assign(entry.username, entry);
}

const DirectoryEntry* find_entry(const DirectoryStore& store, const std::string& username) {
    auto it = store.entries.find(username);
    return it == store.entries.end() ? nullptr : &it->second;
}

const DirectoryEntry& get_entry(const DirectoryStore& store, const std::string& username) {
    const DirectoryEntry* e = find_entry(store, username);
    if (!e) fail(Errc::not_found, "no directory entry for " + username);
    return *e;
}

namespace {

Pin join_pins(const Pin& a, const Pin& b) {
    if (a.state == PinState::forked || b.state == PinState::forked) return Pin{PinState::forked, {}};
    if (a.key != b.key) return Pin{PinState::forked, {}};
    return a;
}

// Deterministic total order on candidate entries: version first, canonical
// bytes as tiebreak, so merge is order-insensitive even on version ties.
bool entry_less(const DirectoryEntry& a, const DirectoryEntry& b) {
    if (a.version != b.version) return a.version < b.version;
    return a.encode() < b.encode();
}

} // namespace

DirectoryStore merge_replicas(const DirectoryStore& a, const DirectoryStore& b) {
    DirectoryStore out;

    for (const auto& [name, pin] : a.pins) {
        auto other = b.pins.find(name);
        out.pins.emplace(name, other == b.pins.end() ? pin : join_pins(pin, other->second));
    }
    for (const auto& [name, pin] : b.pins)
        out.pins.emplace(name, pin); // only names absent from a

    for (const auto& [name, pin] : out.pins) {
        if (pin.state == PinState::forked) continue; // forked names serve nothing
        const DirectoryEntry* best = nullptr;
        for (const DirectoryStore* src : {&a, &b}) {
            const DirectoryEntry* e = find_entry(*src, name);
            if (!e || e->user_pubkey != pin.key || !entry_well_formed(*e)) continue;
            if (!best || entry_less(*best, *e)) best = e;
        }
        if (best) out.entries.emplace(name, *best);
    }
    return out;
}

Bytes encode_store(const DirectoryStore& store) {
    Bytes out;
    append_le32(out, uint32_t(store.pins.size()));
    for (const auto& [name, pin] : store.pins) {
        put_str(out, name);
        out.push_back(uint8_t(pin.state));
        append(out, ByteSpan(pin.key.data(), pin.key.size()));
    }
    append_le32(out, uint32_t(store.entries.size()));
    for (const auto& [name, entry] : store.entries) put_blob(out, entry.encode());
    return out;
}

DirectoryStore decode_store(ByteSpan in) {
    try {
        DirectoryStore store;
        Reader r(in);
        uint32_t n_pins = r.u32();
        for (uint32_t i = 0; i < n_pins; ++i) {
            std::string name = r.str();
            Pin pin;
            uint8_t state = r.u8();
            if (state != uint8_t(PinState::pinned) && state != uint8_t(PinState::forked))
                fail(Errc::corrupt_state, "bad pin state");
            pin.state = PinState(state);
            pin.key = r.raw<32>();
            if (!store.pins.emplace(name, pin).second) fail(Errc::corrupt_state, "duplicate pin");
        }
        uint32_t n_entries = r.u32();
        for (uint32_t i = 0; i < n_entries; ++i) {
            Bytes eb = r.blob();
            Reader er(eb);
            DirectoryEntry e = DirectoryEntry::decode(er);
            er.finish();
            auto pin = store.pins.find(e.username);
            if (pin == store.pins.end() || pin->second.state != PinState::pinned ||
                pin->second.key != e.user_pubkey || !entry_well_formed(e))
                fail(Errc::corrupt_state, "entry inconsistent with pins");
            if (!store.entries.emplace(e.username, e).second)
                fail(Errc::corrupt_state, "duplicate entry");
        }
        r.finish();
        return store;
    } catch (const Error& err) {
        if (err.code() == Errc::corrupt_state) throw;
        fail(Errc::corrupt_state, err.what());
    }
}

} // namespace kintsugi
