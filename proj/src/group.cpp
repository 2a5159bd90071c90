#include "kintsugi/group.hpp"

#include <cstring>
#include <sodium.h>

#include "kintsugi/errors.hpp"
#include "kintsugi/hash.hpp"
#include "sodium_guard.hpp"

namespace kintsugi {

namespace {

Scalar make_scalar(ByteSpan bytes) {
    Scalar s;
    s.width = uint8_t(bytes.size());
    std::memcpy(s.data.data(), bytes.data(), bytes.size());
    return s;
}

Element make_element(ByteSpan bytes) {
    Element e;
    e.width = uint8_t(bytes.size());
    std::memcpy(e.data.data(), bytes.data(), bytes.size());
    return e;
}

// ----- ristretto255 -----

class RistrettoGroup final : public Group {
public:
    RistrettoGroup() { ensure_sodium(); }

    GroupId id() const override { return GroupId::ristretto; }
    size_t element_width() const override { return crypto_core_ristretto255_BYTES; }
    size_t scalar_width() const override { return crypto_core_ristretto255_SCALARBYTES; }

    Scalar scalar_zero() const override { return Scalar{}; }

    Scalar scalar_one() const override { return scalar_from_u64(1); }

    Scalar scalar_from_u64(uint64_t v) const override {
        Scalar s;
        store_le64(s.data.data(), v);
        return s;
    }

    Scalar scalar_add(const Scalar& a, const Scalar& b) const override {
        Scalar r;
        crypto_core_ristretto255_scalar_add(r.data.data(), a.data.data(), b.data.data());
        return r;
    }

    Scalar scalar_sub(const Scalar& a, const Scalar& b) const override {
        Scalar r;
        crypto_core_ristretto255_scalar_sub(r.data.data(), a.data.data(), b.data.data());
        return r;
    }

    Scalar scalar_mul(const Scalar& a, const Scalar& b) const override {
        Scalar r;
        crypto_core_ristretto255_scalar_mul(r.data.data(), a.data.data(), b.data.data());
        return r;
    }

    Scalar scalar_invert(const Scalar& a) const override {
        Scalar r;
        if (crypto_core_ristretto255_scalar_invert(r.data.data(), a.data.data()) != 0)
            fail(Errc::zero_inverse, "inverse of zero scalar");
        return r;
    }

    Scalar scalar_random(Rng& rng) const override {
        std::array<uint8_t, 64> wide;
        rng.fill(wide);
        Scalar r;
        crypto_core_ristretto255_scalar_reduce(r.data.data(), wide.data());
        return r;
    }

    Scalar decode_scalar(ByteSpan in) const override {
        if (in.size() != scalar_width()) fail(Errc::malformed_element, "scalar must be 32 bytes");
        // Canonical iff already reduced mod the group order.
        std::array<uint8_t, 64> wide{};
        std::memcpy(wide.data(), in.data(), in.size());
        Scalar reduced;
        crypto_core_ristretto255_scalar_reduce(reduced.data.data(), wide.data());
        if (!equal_bytes(reduced.bytes(), in)) fail(Errc::malformed_element, "non-canonical scalar");
        return make_scalar(in);
    }

    Element identity() const override { return Element{}; }

    Element generator() const override {
        Element g;
        Scalar one = scalar_one();
        if (crypto_scalarmult_ristretto255_base(g.data.data(), one.data.data()) != 0)
            fail(Errc::internal, "ristretto base mult failed");
        return g;
    }

    Element add(const Element& a, const Element& b) const override {
        Element r;
        if (crypto_core_ristretto255_add(r.data.data(), a.data.data(), b.data.data()) != 0)
            fail(Errc::internal, "ristretto add on invalid encoding");
        return r;
    }

    Element mul(const Scalar& k, const Element& e) const override {
        // libsodium rejects identity results, so the two degenerate inputs
        // that produce it are mapped explicitly.
        if (scalar_is_zero(k) || is_identity(e)) return identity();
        Element r;
        if (crypto_scalarmult_ristretto255(r.data.data(), k.data.data(), e.data.data()) != 0)
            fail(Errc::internal, "ristretto scalarmult failed");
        return r;
    }

    Element hash_to_group(ByteSpan input, std::string_view domain_tag) const override {
        auto h = hash512(domain_tag, input);
        Element r;
        crypto_core_ristretto255_from_hash(r.data.data(), h.data());
        return r;
    }

    Element decode_element(ByteSpan in) const override {
        if (in.size() != element_width()) fail(Errc::malformed_element, "element must be 32 bytes");
        if (crypto_core_ristretto255_is_valid_point(in.data()) != 1)
            fail(Errc::malformed_element, "non-canonical ristretto encoding");
        return make_element(in);
    }
};

uint64_t mulmod_u64(uint64_t a, uint64_t b, uint64_t m) {
    return static_cast<uint64_t>((static_cast<__uint128_t>(a) * b) % m);
}

uint64_t powmod_u64(uint64_t base, uint64_t exp, uint64_t m) {
    uint64_t acc = 1 % m;
    base %= m;
    while (exp) {
        if (exp & 1) acc = mulmod_u64(acc, base, m);
        base = mulmod_u64(base, base, m);
        exp >>= 1;
    }
    return acc;
}

} // namespace

// ----- toy group (additive Z_p) -----

ToyGroup::ToyGroup(uint64_t prime) : p_(prime) {
    ensure_sodium();
    if (prime < 3) fail(Errc::internal, "toy prime too small");
}

Scalar ToyGroup::scalar_from_u64(uint64_t v) const {
    Scalar s;
    s.width = 8;
    store_le64(s.data.data(), v % p_);
    return s;
}

uint64_t ToyGroup::scalar_value(const Scalar& s) const { return load_le64(s.data.data()); }

uint64_t ToyGroup::element_value(const Element& e) const { return load_le64(e.data.data()); }

Scalar ToyGroup::scalar_add(const Scalar& a, const Scalar& b) const {
    return scalar_from_u64(scalar_value(a) + scalar_value(b));
}

Scalar ToyGroup::scalar_sub(const Scalar& a, const Scalar& b) const {
    return scalar_from_u64(scalar_value(a) + p_ - scalar_value(b));
}

Scalar ToyGroup::scalar_mul(const Scalar& a, const Scalar& b) const {
    return scalar_from_u64(mulmod_u64(scalar_value(a), scalar_value(b), p_));
}

Scalar ToyGroup::scalar_invert(const Scalar& a) const {
    uint64_t v = scalar_value(a);
    if (v == 0) fail(Errc::zero_inverse, "inverse of zero scalar");
    return scalar_from_u64(powmod_u64(v, p_ - 2, p_));
}

Scalar ToyGroup::scalar_random(Rng& rng) const { return scalar_from_u64(rng.below(p_)); }

Scalar ToyGroup::decode_scalar(ByteSpan in) const {
    if (in.size() != 8) fail(Errc::malformed_element, "toy scalar must be 8 bytes");
    uint64_t v = load_le64(in.data());
    if (v >= p_) fail(Errc::malformed_element, "toy scalar out of range");
    return scalar_from_u64(v);
}

Element ToyGroup::element_from_u64(uint64_t v) const {
    Element e;
    e.width = 8;
    store_le64(e.data.data(), v % p_);
    return e;
}

Element ToyGroup::add(const Element& a, const Element& b) const {
    return element_from_u64(element_value(a) + element_value(b));
}

Element ToyGroup::mul(const Scalar& k, const Element& e) const {
    return element_from_u64(mulmod_u64(scalar_value(k), element_value(e), p_));
}

Element ToyGroup::hash_to_group(ByteSpan input, std::string_view domain_tag) const {
    // Reduction of the wide hash mod p. Discrete logs in Z_p are trivial;
    // this instantiation exists for hand-checkable oracle tests only.
    auto h = hash512(domain_tag, input);
    __uint128_t acc = 0;
    for (uint8_t b : h) acc = (acc << 8 | b) % p_;
    return element_from_u64(uint64_t(acc));
}

Element ToyGroup::decode_element(ByteSpan in) const {
    if (in.size() != 8) fail(Errc::malformed_element, "toy element must be 8 bytes");
    uint64_t v = load_le64(in.data());
    if (v >= p_) fail(Errc::malformed_element, "toy element out of range");
    return element_from_u64(v);
}

const Group& ristretto_group() {
    static RistrettoGroup g;
    return g;
}

const Group& toy_group() {
    static ToyGroup g(101);
    return g;
}

const Group& group_for(GroupId id) {
    switch (id) {
    case GroupId::ristretto: return ristretto_group();
    case GroupId::toy: return toy_group();
    }
    fail(Errc::malformed_message, "unknown group id");
}

GroupId group_id_from_name(std::string_view name) {
    if (name == "ristretto") return GroupId::ristretto;
    if (name == "toy") return GroupId::toy;
    fail(Errc::scenario_error, "unknown group name: " + std::string(name));
}

std::string_view group_name(GroupId id) {
    return id == GroupId::ristretto ? "ristretto" : "toy";
}

} // namespace kintsugi
