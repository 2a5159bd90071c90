#pragma once

#include <array>
#include <cstdint>
#include <string_view>

#include "kintsugi/bytes.hpp"
#include "kintsugi/rng.hpp"

namespace kintsugi {

enum class GroupId : uint8_t {
    ristretto = 1, // ristretto255, 32-byte encodings
    toy = 2,       // additive group Z_p (small prime p), 8-byte encodings
};

// Field scalar in canonical reduced form. Width depends on the group:
// 32 bytes (little-endian mod L) for ristretto, 8 bytes (little-endian
// mod p) for the toy group. Padding beyond `width` is always zero, so
// default equality is well defined.
struct Scalar {
    std::array<uint8_t, 32> data{};
    uint8_t width = 32;

    ByteSpan bytes() const { return {data.data(), width}; }
    friend bool operator==(const Scalar&, const Scalar&) = default;
    friend auto operator<=>(const Scalar&, const Scalar&) = default;
};

// Group element in canonical encoding; same width conventions as Scalar.
struct Element {
    std::array<uint8_t, 32> data{};
    uint8_t width = 32;

    ByteSpan bytes() const { return {data.data(), width}; }
    friend bool operator==(const Element&, const Element&) = default;
    friend auto operator<=>(const Element&, const Element&) = default;
};

// Prime-order group with its scalar field. Two instantiations: the
// production ristretto255 group and a hand-checkable additive group over a
// small prime used as a brute-force oracle in tests. All operations are
// pure; instances are stateless and safe to share across threads.
class Group {
public:
    virtual ~Group() = default;

    virtual GroupId id() const = 0;
    virtual size_t element_width() const = 0;
    virtual size_t scalar_width() const = 0;

    // ----- scalar field -----
    virtual Scalar scalar_zero() const = 0;
    virtual Scalar scalar_one() const = 0;
    virtual Scalar scalar_from_u64(uint64_t v) const = 0;
    virtual Scalar scalar_add(const Scalar& a, const Scalar& b) const = 0;
    virtual Scalar scalar_sub(const Scalar& a, const Scalar& b) const = 0;
    virtual Scalar scalar_mul(const Scalar& a, const Scalar& b) const = 0;
    virtual Scalar scalar_invert(const Scalar& a) const = 0; // Errc::zero_inverse on 0
    virtual Scalar scalar_random(Rng& rng) const = 0;
    virtual Scalar decode_scalar(ByteSpan in) const = 0; // Errc::malformed_element
    bool scalar_is_zero(const Scalar& a) const { return a == scalar_zero(); }

    // ----- group -----
    virtual Element identity() const = 0;
    virtual Element generator() const = 0;
    virtual Element add(const Element& a, const Element& b) const = 0;
    virtual Element mul(const Scalar& k, const Element& e) const = 0;
    virtual Element hash_to_group(ByteSpan input, std::string_view domain_tag) const = 0;
    virtual Element decode_element(ByteSpan in) const = 0; // Errc::malformed_element

    Bytes encode_element(const Element& e) const { return Bytes(e.bytes().begin(), e.bytes().end()); }
    Bytes encode_scalar(const Scalar& s) const { return Bytes(s.bytes().begin(), s.bytes().end()); }
    bool is_identity(const Element& e) const { return e == identity(); }
};

// Process-wide singletons.
const Group& ristretto_group();
const Group& toy_group(); // p = 101

const Group& group_for(GroupId id);
GroupId group_id_from_name(std::string_view name); // "ristretto" | "toy"
std::string_view group_name(GroupId id);

// Toy group over an arbitrary small prime, for exhaustive-search tests.
class ToyGroup final : public Group {
public:
    explicit ToyGroup(uint64_t prime);

    GroupId id() const override { return GroupId::toy; }
    size_t element_width() const override { return 8; }
    size_t scalar_width() const override { return 8; }
    uint64_t order() const { return p_; }

    Scalar scalar_zero() const override { return scalar_from_u64(0); }
    Scalar scalar_one() const override { return scalar_from_u64(1); }
    Scalar scalar_from_u64(uint64_t v) const override;
    Scalar scalar_add(const Scalar& a, const Scalar& b) const override;
    Scalar scalar_sub(const Scalar& a, const Scalar& b) const override;
    Scalar scalar_mul(const Scalar& a, const Scalar& b) const override;
    Scalar scalar_invert(const Scalar& a) const override;
    Scalar scalar_random(Rng& rng) const override;
    Scalar decode_scalar(ByteSpan in) const override;

    Element identity() const override { return element_from_u64(0); }
    Element generator() const override { return element_from_u64(1); }
    Element add(const Element& a, const Element& b) const override;
    Element mul(const Scalar& k, const Element& e) const override;
    Element hash_to_group(ByteSpan input, std::string_view domain_tag) const override;
    Element decode_element(ByteSpan in) const override;

    Element element_from_u64(uint64_t v) const;
    uint64_t scalar_value(const Scalar& s) const;
    uint64_t element_value(const Element& e) const;

private:
    uint64_t p_;
};

} // namespace kintsugi
