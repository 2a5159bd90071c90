#include <doctest.h>

#include <algorithm>
#include <set>

#include "kintsugi/errors.hpp"
#include "kintsugi/group.hpp"
#include "kintsugi/hash.hpp"
#include "kintsugi/oprf.hpp"
#include "kintsugi/sharing.hpp"
#include "oracle.hpp"

using namespace kintsugi;

namespace {

DeterministicRng test_rng(uint64_t seed = 20) { return DeterministicRng(seed, "oprf-tests"); }

const ToyGroup& toy() { return dynamic_cast<const ToyGroup&>(toy_group()); }

BlindingState toy_state(uint64_t p_value, std::initializer_list<std::pair<uint32_t, uint64_t>> rs) {
    BlindingState st;
    st.password_point = toy().element_from_u64(p_value);
    for (auto [i, r] : rs) st.blinding.emplace(i, toy().scalar_from_u64(r));
    return st;
}

} // namespace

TEST_CASE("worked evaluation chain in the toy group") {
    // P = 7, r1 = 23, r2 = 11, shares (1,22) (2,25) of secret 19 with t = 1
    auto st = toy_state(7, {{1, 23}, {2, 11}});
    BlindedElement b1{1, toy().mul(st.blinding.at(1), st.password_point)};
    BlindedElement b2{2, toy().mul(st.blinding.at(2), st.password_point)};
    CHECK(toy().element_value(b1.element) == 60);
    CHECK(toy().element_value(b2.element) == 77);

    Share s1{1, toy().scalar_from_u64(22), 0, 1};
    Share s2{2, toy().scalar_from_u64(25), 0, 1};
    auto e1 = evaluate(toy_group(), s1, b1);
    auto e2 = evaluate(toy_group(), s2, b2);
    CHECK(toy().element_value(e1.element) == 7);
    CHECK(toy().element_value(e2.element) == 6);
    CHECK(e1.index == 1);
    CHECK(e1.epoch == 0);

    Element out = unblind_and_combine(toy_group(), st, {e1, e2}, 1);
    // s * P = 19 * 7 = 32 mod 101
    CHECK(toy().element_value(out) == 32);
}

TEST_CASE("zero share evaluates to the identity") {
    Share z{1, toy().scalar_zero(), 0, 1};
    BlindedElement b{1, toy().element_from_u64(60)};
    CHECK(evaluate(toy_group(), z, b).element == toy_group().identity());
}

TEST_CASE("blind produces fresh randomness over a fixed password point") {
    auto rng = test_rng();
    Bytes pwd = to_bytes("correct horse");
    auto [st1, blinded1] = blind(toy_group(), pwd, {1, 2, 3}, rng);
    auto [st2, blinded2] = blind(toy_group(), pwd, {1, 2, 3}, rng);
    CHECK(st1.password_point == st2.password_point);
    CHECK(st1.password_point == toy_group().hash_to_group(pwd, kDomainPassword));
    REQUIRE(blinded1.size() == 3);
    // fresh blinding: the same node sees different elements across sessions
    bool any_diff = false;
    for (size_t k = 0; k < 3; ++k) any_diff |= !(blinded1[k].element == blinded2[k].element);
    CHECK(any_diff);
    for (const auto& [i, r] : st1.blinding) {
        CHECK(!toy_group().scalar_is_zero(r));
        CHECK(toy_group().mul(r, st1.password_point) == blinded1[i == 1 ? 0 : i == 2 ? 1 : 2].element);
    }
    CHECK_THROWS_AS((void)blind(toy_group(), Bytes{}, {1}, rng), Error);
    CHECK_THROWS_AS((void)blind(toy_group(), pwd, {1, 1}, rng), Error);
}

TEST_CASE("blinding covers every nonidentity element exhaustively") {
    // additive toy group: for fixed P != identity, { r*P : r in 1..p-1 } is all of Z_p \ {0}
    std::set<uint64_t> seen;
    for (uint64_t r = 1; r < 101; ++r)
        seen.insert(toy().element_value(toy().mul(toy().scalar_from_u64(r), toy().element_from_u64(7))));
    CHECK(seen.size() == 100);
    CHECK(seen.count(0) == 0);
}

TEST_CASE("singleton combination with t = 0") {
    auto st = toy_state(7, {{4, 23}});
    EvaluatedElement e{4, 0, toy().element_from_u64(oracle::mulm(19, oracle::mulm(23, 7, 101), 101))};
    Element out = unblind_and_combine(toy_group(), st, {e}, 0);
    CHECK(toy().element_value(out) == oracle::mulm(19, 7, 101));
}

TEST_CASE("unblind_and_combine input validation") {
    auto st = toy_state(7, {{1, 23}, {2, 11}});
    EvaluatedElement e1{1, 0, toy().element_from_u64(7)};
    EvaluatedElement e2{2, 0, toy().element_from_u64(6)};

    CHECK_THROWS_WITH_AS((void)unblind_and_combine(toy_group(), st, {e1}, 1),
                         doctest::Contains("InsufficientResponses"), Error);

    auto stale = e2;
    stale.epoch = 3;
    CHECK_THROWS_WITH_AS((void)unblind_and_combine(toy_group(), st, {e1, stale}, 1),
                         doctest::Contains("EpochMismatch"), Error);

    EvaluatedElement unknown{9, 0, toy().element_from_u64(5)};
    CHECK_THROWS_WITH_AS((void)unblind_and_combine(toy_group(), st, {e1, unknown}, 1),
                         doctest::Contains("UnknownIndex"), Error);

    CHECK_THROWS_WITH_AS((void)unblind_and_combine(toy_group(), st, {e1, e1}, 1),
                         doctest::Contains("DuplicateIndex"), Error);
}

TEST_CASE("oracle equivalence: full OPRF equals direct multiplication") {
    auto rng = test_rng(21);
    for (int round = 0; round < 25; ++round) {
        uint32_t t = 1 + uint32_t(rng.below(3));
        uint32_t n = t + 1 + uint32_t(rng.below(3));
        std::vector<uint32_t> indices;
        for (uint32_t i = 1; i <= n; ++i) indices.push_back(i);

        Scalar s = toy_group().scalar_random(rng);
        auto shares = deal_shares(toy_group(), s, t, indices, rng);
        Bytes pwd = to_bytes("pwd-" + std::to_string(round));
        auto [st, blinded] = blind(toy_group(), pwd, indices, rng);
        Element expected = toy_group().mul(s, st.password_point);

        std::vector<EvaluatedElement> responses;
        for (uint32_t i = 0; i < n; ++i) responses.push_back(evaluate(toy_group(), shares[i], blinded[i]));

        // every (t+1)-subset gives the same output, in any order
        std::vector<bool> pick(n, false);
        std::fill(pick.begin(), pick.begin() + t + 1, true);
        do {
            std::vector<EvaluatedElement> subset;
            for (uint32_t i = 0; i < n; ++i)
                if (pick[i]) subset.push_back(responses[i]);
            CHECK(unblind_and_combine(toy_group(), st, subset, t) == expected);
            std::reverse(subset.begin(), subset.end());
            CHECK(unblind_and_combine(toy_group(), st, subset, t) == expected);
        } while (std::prev_permutation(pick.begin(), pick.end()));
    }
}

TEST_CASE("oprf end-to-end over ristretto") {
    auto rng = test_rng(22);
    const Group& g = ristretto_group();
    Scalar s = g.scalar_random(rng);
    auto shares = deal_shares(g, s, 3, {1, 2, 3, 4, 5}, rng);
    auto [st, blinded] = blind(g, to_bytes("hunter2"), {1, 2, 3, 4, 5}, rng);
    std::vector<EvaluatedElement> responses;
    for (int i = 0; i < 4; ++i) responses.push_back(evaluate(g, shares[i], blinded[i]));
    Element out = unblind_and_combine(g, st, responses, 3);
    CHECK(out == g.mul(s, g.hash_to_group(to_bytes("hunter2"), kDomainPassword)));

    // distinct passwords give distinct outputs
    auto [st2, blinded2] = blind(g, to_bytes("hunter3"), {1, 2, 3, 4, 5}, rng);
    std::vector<EvaluatedElement> responses2;
    for (int i = 0; i < 4; ++i) responses2.push_back(evaluate(g, shares[i], blinded2[i]));
    CHECK(unblind_and_combine(g, st2, responses2, 3) != out);
}

TEST_CASE("backup key derivation is deterministic and 32 bytes") {
    const Group& g = ristretto_group();
    auto rng = test_rng(23);
    Element e1 = g.mul(g.scalar_random(rng), g.generator());
    Element e2 = g.mul(g.scalar_random(rng), g.generator());
    auto k1 = derive_backup_key(g, e1);
    auto k2 = derive_backup_key(g, e1);
    auto k3 = derive_backup_key(g, e2);
    CHECK(k1.size() == 32);
    CHECK(k1 == k2);
    CHECK(k1 != k3);
    // group-specific encoding feeds the KDF, so toy and ristretto never collide structurally
    CHECK(derive_backup_key(toy_group(), toy().element_from_u64(32)).size() == 32);
}

TEST_CASE("backup seal/open round-trip and tamper rejection") {
    auto rng = test_rng(24);
    BackupKey key{};
    rng.fill(key);
    Bytes pt = to_bytes("the recovery payload");
    Bytes user = to_bytes("alice");

    auto backup = seal_backup(key, pt, user, rng);
    CHECK(open_backup(key, backup, user) == pt);

    // one flipped ciphertext bit fails authentication
    for (size_t pos : {size_t(0), backup.ciphertext.size() / 2, backup.ciphertext.size() - 1}) {
        auto bad = backup;
        bad.ciphertext[pos] ^= 0x01;
        CHECK_THROWS_WITH_AS((void)open_backup(key, bad, user), doctest::Contains("DecryptionFailed"),
                             Error);
    }

    // flipped nonce bit
    auto badn = backup;
    badn.nonce[0] ^= 0x01;
    CHECK_THROWS_AS((void)open_backup(key, badn, user), Error);

    // wrong associated data
    CHECK_THROWS_AS((void)open_backup(key, backup, to_bytes("mallory")), Error);

    // wrong key
    BackupKey other{};
    rng.fill(other);
    CHECK_THROWS_AS((void)open_backup(other, backup, user), Error);

    // empty plaintext round-trips
    auto empty = seal_backup(key, Bytes{}, user, rng);
    CHECK(open_backup(key, empty, user).empty());
}

TEST_CASE("wrong password end-to-end yields DecryptionFailed") {
    auto rng = test_rng(25);
    const Group& g = toy_group();
    Scalar s = g.scalar_random(rng);
    auto shares = deal_shares(g, s, 1, {1, 2, 3}, rng);
    Bytes user = to_bytes("bob");
    Bytes payload = to_bytes("seed phrase");

    // registration: key from the true OPRF output
    Element p_good = g.hash_to_group(to_bytes("good password"), kDomainPassword);
    auto backup = seal_backup(derive_backup_key(g, g.mul(s, p_good)), payload, user, rng);

    // recovery with the right password succeeds
    auto [st, blinded] = blind(g, to_bytes("good password"), {1, 2}, rng);
    std::vector<EvaluatedElement> rs;
    for (int i = 0; i < 2; ++i) rs.push_back(evaluate(g, shares[i], blinded[i]));
    Element out = unblind_and_combine(g, st, rs, 1);
    CHECK(open_backup(derive_backup_key(g, out), backup, user) == payload);

    // recovery with a wrong password produces a key that fails to open the backup
    auto [st2, blinded2] = blind(g, to_bytes("wrong password"), {1, 2}, rng);
    std::vector<EvaluatedElement> rs2;
    for (int i = 0; i < 2; ++i) rs2.push_back(evaluate(g, shares[i], blinded2[i]));
    Element out2 = unblind_and_combine(g, st2, rs2, 1);
    REQUIRE(out2 != out); // password points differ in this dictionary
    CHECK_THROWS_WITH_AS((void)open_backup(derive_backup_key(g, out2), backup, user),
                         doctest::Contains("DecryptionFailed"), Error);
}

TEST_CASE("encrypted backup serialization round-trip") {
    auto rng = test_rng(26);
    BackupKey key{};
    rng.fill(key);
    auto backup = seal_backup(key, to_bytes("x"), to_bytes("u"), rng);
    Bytes wire = backup.encode();
    CHECK(wire.size() == 24 + 4 + backup.ciphertext.size());
    CHECK(load_le32(ByteSpan(wire).subspan(24, 4)) == backup.ciphertext.size());
    CHECK(EncryptedBackup::decode(wire) == backup);

    Bytes truncated(wire.begin(), wire.end() - 1);
    CHECK_THROWS_WITH_AS((void)EncryptedBackup::decode(truncated),
                         doctest::Contains("MalformedMessage"), Error);
    Bytes tiny(10, 0);
    CHECK_THROWS_AS((void)EncryptedBackup::decode(tiny), Error);
    Bytes extended = wire;
    extended.push_back(0);
    CHECK_THROWS_AS((void)EncryptedBackup::decode(extended), Error);
}

TEST_CASE("backup key survives a share refresh") {
    // refresh rerandomizes shares but keeps the joint secret, so the derived key is stable
    auto rng = test_rng(27);
    const Group& g = toy_group();
    Scalar s = g.scalar_random(rng);
    auto shares = deal_shares(g, s, 1, {1, 2, 3}, rng);
    Element p = g.hash_to_group(to_bytes("pw"), kDomainPassword);
    auto key_before = derive_backup_key(g, g.mul(s, p));

    auto sub1 = make_refresh_subshares(g, shares[0], 1, {1, 2, 3}, rng);
    auto sub2 = make_refresh_subshares(g, shares[1], 1, {1, 2, 3}, rng);
    std::vector<Share> fresh;
    for (size_t j = 0; j < 3; ++j)
        fresh.push_back(
            combine_subshares(g, uint32_t(j + 1), {sub1[j], sub2[j]}, {1, 2}));

    auto [st, blinded] = blind(g, to_bytes("pw"), {1, 2, 3}, rng);
    std::vector<EvaluatedElement> rs;
    for (size_t j = 0; j < 2; ++j) rs.push_back(evaluate(g, fresh[j], blinded[j]));
    auto key_after = derive_backup_key(g, unblind_and_combine(g, st, rs, 1));
    CHECK(key_before == key_after);
}
