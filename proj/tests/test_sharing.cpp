#include <doctest.h>

#include <algorithm>

#include "kintsugi/errors.hpp"
#include "kintsugi/group.hpp"
#include "kintsugi/sharing.hpp"
#include "oracle.hpp"

using namespace kintsugi;

namespace {

DeterministicRng test_rng(uint64_t seed = 10) { return DeterministicRng(seed, "sharing-tests"); }

const ToyGroup& toy() { return dynamic_cast<const ToyGroup&>(toy_group()); }

std::vector<Share> toy_shares(std::initializer_list<std::pair<uint32_t, uint64_t>> pts,
                              uint32_t threshold, uint64_t epoch = 0) {
    std::vector<Share> out;
    for (auto [idx, v] : pts) out.push_back(Share{idx, toy().scalar_from_u64(v), epoch, threshold});
    return out;
}

} // namespace

TEST_CASE("lagrange coefficients match known values") {
    // frozen via oracle enumeration: {1,2} -> [2, 100], {1,3} -> [52, 50]
    auto l12 = lagrange_at_zero(toy_group(), {1, 2});
    CHECK(toy().scalar_value(l12[0]) == 2);
    CHECK(toy().scalar_value(l12[1]) == 100);
    auto l13 = lagrange_at_zero(toy_group(), {1, 3});
    CHECK(toy().scalar_value(l13[0]) == 52);
    CHECK(toy().scalar_value(l13[1]) == 50);
}

TEST_CASE("reconstruction of the worked example") {
    // secret 19, poly 19 + 3x: shares (1,22) (2,25) (3,28), t = 1
    auto s12 = toy_shares({{1, 22}, {2, 25}}, 1);
    CHECK(toy().scalar_value(reconstruct_secret(toy_group(), s12)) == 19);
    auto s13 = toy_shares({{1, 22}, {3, 28}}, 1);
    CHECK(toy().scalar_value(reconstruct_secret(toy_group(), s13)) == 19);
    auto s23 = toy_shares({{2, 25}, {3, 28}}, 1);
    CHECK(toy().scalar_value(reconstruct_secret(toy_group(), s23)) == 19);
}

TEST_CASE("deal then reconstruct round-trips for every (t+1)-subset") {
    auto rng = test_rng();
    for (uint32_t t : {1u, 2u, 3u}) {
        uint32_t n = t + 2;
        std::vector<uint32_t> indices;
        for (uint32_t i = 1; i <= n; ++i) indices.push_back(i);
        Scalar secret = toy_group().scalar_random(rng);
        auto shares = deal_shares(toy_group(), secret, t, indices, rng);
        REQUIRE(shares.size() == n);
        for (const auto& sh : shares) {
            CHECK(sh.epoch == 0);
            CHECK(sh.threshold == t);
        }
        // all (t+1)-subsets agree on the secret
        std::vector<bool> pick(n, false);
        std::fill(pick.begin(), pick.begin() + t + 1, true);
        do {
            std::vector<Share> subset;
            for (uint32_t i = 0; i < n; ++i)
                if (pick[i]) subset.push_back(shares[i]);
            CHECK(reconstruct_secret(toy_group(), subset) == secret);
        } while (std::prev_permutation(pick.begin(), pick.end()));
    }
}

TEST_CASE("degree-zero sharing: every share equals the secret") {
    auto rng = test_rng(16);
    Scalar s = toy().scalar_from_u64(77);
    auto shares = deal_shares(toy_group(), s, 0, {1, 2, 3}, rng);
    for (const auto& sh : shares) CHECK(sh.value == s);
    CHECK(reconstruct_secret(toy_group(), {shares[1]}) == s);

    auto subs = make_refresh_subshares(toy_group(), shares[0], 0, {4, 5}, rng);
    for (const auto& ss : subs) CHECK(ss.value == s);
}

TEST_CASE("singleton interpolation has coefficient one") {
    auto l = lagrange_at_zero(toy_group(), {7});
    REQUIRE(l.size() == 1);
    CHECK(l[0] == toy_group().scalar_one());
}

TEST_CASE("reconstruction is order independent") {
    auto rng = test_rng(11);
    Scalar secret = toy_group().scalar_random(rng);
    auto shares = deal_shares(toy_group(), secret, 2, {1, 2, 3, 4, 5}, rng);
    std::vector<Share> subset{shares[4], shares[0], shares[2]};
    CHECK(reconstruct_secret(toy_group(), subset) == secret);
    std::swap(subset[0], subset[2]);
    CHECK(reconstruct_secret(toy_group(), subset) == secret);
}

TEST_CASE("t shares leave the secret information-theoretically hidden") {
    // with p = 11 we can enumerate: any t points are consistent with every secret
    ToyGroup small(11);
    auto rng = test_rng(12);
    for (int round = 0; round < 20; ++round) {
        uint64_t secret = rng.below(11);
        auto shares = deal_shares(small, small.scalar_from_u64(secret), 2, {1, 2, 3, 4}, rng);
        std::vector<std::pair<uint64_t, uint64_t>> pts;
        for (int i = 0; i < 2; ++i) pts.push_back({shares[i].index, small.scalar_value(shares[i].value)});
        auto consistent = oracle::consistent_constant_terms(pts, 2, 11);
        // every candidate secret remains possible
        REQUIRE(consistent.size() == 11);
        for (uint64_t c = 0; c < 11; ++c) CHECK(consistent.count(c) == 1);
    }
}

TEST_CASE("reconstruct rejects bad inputs") {
    auto ok = toy_shares({{1, 22}, {2, 25}}, 1);
    CHECK_THROWS_WITH_AS((void)reconstruct_secret(toy_group(), {ok[0]}),
                         doctest::Contains("InsufficientShares"), Error);

    auto dup = toy_shares({{1, 22}, {1, 22}}, 1);
    CHECK_THROWS_WITH_AS((void)reconstruct_secret(toy_group(), dup),
                         doctest::Contains("DuplicateIndex"), Error);

    auto mixed = toy_shares({{1, 22}, {2, 25}}, 1);
    mixed[1].epoch = 1;
    CHECK_THROWS_WITH_AS((void)reconstruct_secret(toy_group(), mixed),
                         doctest::Contains("EpochMismatch"), Error);

    auto tmix = toy_shares({{1, 22}, {2, 25}}, 1);
    tmix[1].threshold = 2;
    CHECK_THROWS_WITH_AS((void)reconstruct_secret(toy_group(), tmix),
                         doctest::Contains("EpochMismatch"), Error);

    auto zero = toy_shares({{0, 19}, {2, 25}}, 1);
    CHECK_THROWS_WITH_AS((void)reconstruct_secret(toy_group(), zero),
                         doctest::Contains("DuplicateIndex"), Error);
}

TEST_CASE("deal_shares validates parameters") {
    auto rng = test_rng(13);
    Scalar s = toy().scalar_from_u64(19);
    CHECK_THROWS_WITH_AS((void)deal_shares(toy_group(), s, 2, {1, 2}, rng),
                         doctest::Contains("InsufficientIndices"), Error);
    CHECK_THROWS_WITH_AS((void)deal_shares(toy_group(), s, 1, {1, 1, 2}, rng),
                         doctest::Contains("DuplicateIndex"), Error);
    CHECK_THROWS_WITH_AS((void)deal_shares(toy_group(), s, 1, {0, 1, 2}, rng),
                         doctest::Contains("DuplicateIndex"), Error);
}

TEST_CASE("refresh worked example") {
    // old shares (1,22) (2,25) from poly 19 + 3x, t = 1
    // node 1 refresh poly 22 + 4x -> subshares 26, 30
    // node 2 refresh poly 25 + 9x -> subshares 34, 43
    // lambda over {1,2} = [2, 100]
    // new share j=1: 2*26 + 100*34 = 52 + 3400 = 3452 = 18 mod 101
    // new share j=2: 2*30 + 100*43 = 60 + 4300 = 4360 = 17 mod 101
    std::vector<RefreshSubshare> to1{
        {1, 1, toy().scalar_from_u64(26), 0, 1, 1},
        {2, 1, toy().scalar_from_u64(34), 0, 1, 1},
    };
    Share n1 = combine_subshares(toy_group(), 1, to1, {1, 2});
    CHECK(toy().scalar_value(n1.value) == 18);
    CHECK(n1.epoch == 1);
    CHECK(n1.threshold == 1);

    std::vector<RefreshSubshare> to2{
        {1, 2, toy().scalar_from_u64(30), 0, 1, 1},
        {2, 2, toy().scalar_from_u64(43), 0, 1, 1},
    };
    Share n2 = combine_subshares(toy_group(), 2, to2, {1, 2});
    CHECK(toy().scalar_value(n2.value) == 17);

    // new shares still reconstruct 19
    CHECK(toy().scalar_value(reconstruct_secret(toy_group(), {n1, n2})) == 19);

    // mixing epochs reconstructs garbage and must be rejected
    auto old1 = toy_shares({{1, 22}}, 1)[0];
    CHECK_THROWS_WITH_AS((void)reconstruct_secret(toy_group(), {old1, n2}),
                         doctest::Contains("EpochMismatch"), Error);
    // oracle: interpolating (1,22),(2,17) blindly gives 27, not 19
    CHECK(oracle::interpolate_secret({{1, 22}, {2, 17}}, 1, 101) == 27);
}

TEST_CASE("full refresh cycle preserves the secret across epochs and threshold change") {
    auto rng = test_rng(14);
    for (int round = 0; round < 10; ++round) {
        Scalar secret = toy_group().scalar_random(rng);
        uint32_t t_old = 2, t_new = 3;
        std::vector<uint32_t> old_idx{1, 2, 3, 4, 5};
        std::vector<uint32_t> new_idx{2, 3, 6, 7, 8, 9};
        auto old_shares = deal_shares(toy_group(), secret, t_old, old_idx, rng);

        // any t_old+1 contributors suffice
        std::vector<uint32_t> contributors{1, 3, 5};
        std::vector<std::vector<RefreshSubshare>> per_contributor;
        for (uint32_t c : contributors)
            per_contributor.push_back(
                make_refresh_subshares(toy_group(), old_shares[c - 1], t_new, new_idx, rng));

        std::vector<Share> new_shares;
        for (size_t j = 0; j < new_idx.size(); ++j) {
            std::vector<RefreshSubshare> inbox;
            for (const auto& batch : per_contributor) inbox.push_back(batch[j]);
            new_shares.push_back(combine_subshares(toy_group(), new_idx[j], inbox, contributors));
        }

        for (const auto& sh : new_shares) {
            CHECK(sh.epoch == 1);
            CHECK(sh.threshold == t_new);
        }
        std::vector<Share> quorum(new_shares.begin(), new_shares.begin() + t_new + 1);
        CHECK(reconstruct_secret(toy_group(), quorum) == secret);

        // old and new shares never combine
        std::vector<Share> stale{old_shares[0], new_shares[0], new_shares[1], new_shares[2]};
        CHECK_THROWS_AS((void)reconstruct_secret(toy_group(), stale), Error);
    }
}

TEST_CASE("combine_subshares validates addressing and contributor sets") {
    auto mk = [&](uint32_t from, uint32_t to, uint64_t v) {
        return RefreshSubshare{from, to, toy().scalar_from_u64(v), 0, 1, 1};
    };

    // misaddressed: subshare meant for node 2 offered to node 1
    std::vector<RefreshSubshare> wrong{mk(1, 1, 26), mk(2, 2, 43)};
    CHECK_THROWS_WITH_AS((void)combine_subshares(toy_group(), 1, wrong, {1, 2}),
                         doctest::Contains("MisaddressedSubshare"), Error);

    // contributor set mismatch: expected {1,2}, got {1,3}
    std::vector<RefreshSubshare> off{mk(1, 1, 26), mk(3, 1, 34)};
    CHECK_THROWS_AS((void)combine_subshares(toy_group(), 1, off, {1, 2}), Error);

    // duplicate contributor
    std::vector<RefreshSubshare> dup{mk(1, 1, 26), mk(1, 1, 26)};
    CHECK_THROWS_WITH_AS((void)combine_subshares(toy_group(), 1, dup, {1, 2}),
                         doctest::Contains("DuplicateIndex"), Error);

    // missing contributor
    std::vector<RefreshSubshare> missing{mk(1, 1, 26)};
    CHECK_THROWS_WITH_AS((void)combine_subshares(toy_group(), 1, missing, {1, 2}),
                         doctest::Contains("InsufficientSubshares"), Error);

    // inconsistent epochs across subshares
    std::vector<RefreshSubshare> epochs{mk(1, 1, 26), mk(2, 1, 34)};
    epochs[1].old_epoch = 5;
    epochs[1].new_epoch = 6;
    CHECK_THROWS_WITH_AS((void)combine_subshares(toy_group(), 1, epochs, {1, 2}),
                         doctest::Contains("MixedEpoch"), Error);

    // inconsistent new threshold
    std::vector<RefreshSubshare> thr{mk(1, 1, 26), mk(2, 1, 34)};
    thr[1].new_threshold = 2;
    CHECK_THROWS_WITH_AS((void)combine_subshares(toy_group(), 1, thr, {1, 2}),
                         doctest::Contains("MixedEpoch"), Error);
}

TEST_CASE("sharing works over ristretto as well") {
    auto rng = test_rng(15);
    const Group& g = ristretto_group();
    Scalar secret = g.scalar_random(rng);
    auto shares = deal_shares(g, secret, 3, {1, 2, 3, 4, 5}, rng);
    std::vector<Share> quorum(shares.begin(), shares.begin() + 4);
    CHECK(reconstruct_secret(g, quorum) == secret);

    auto subs1 = make_refresh_subshares(g, shares[0], 2, {1, 2, 3, 4}, rng);
    auto subs2 = make_refresh_subshares(g, shares[1], 2, {1, 2, 3, 4}, rng);
    auto subs3 = make_refresh_subshares(g, shares[2], 2, {1, 2, 3, 4}, rng);
    auto subs4 = make_refresh_subshares(g, shares[3], 2, {1, 2, 3, 4}, rng);
    std::vector<Share> fresh;
    for (size_t j = 0; j < 4; ++j)
        fresh.push_back(combine_subshares(g, static_cast<uint32_t>(j + 1),
                                          {subs1[j], subs2[j], subs3[j], subs4[j]}, {1, 2, 3, 4}));
    std::vector<Share> q2(fresh.begin(), fresh.begin() + 3);
    CHECK(reconstruct_secret(g, q2) == secret);
}
