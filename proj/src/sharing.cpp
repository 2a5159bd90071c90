#include "kintsugi/sharing.hpp"

#include <algorithm>
#include <map>
#include <set>

#include "kintsugi/errors.hpp"

namespace kintsugi {

namespace {

void check_indices(const std::vector<uint32_t>& indices, size_t minimum, Errc too_few) {
    std::set<uint32_t> seen;
    for (uint32_t i : indices) {
        if (i == 0) fail(Errc::duplicate_index, "index 0 is reserved for the secret");
        if (!seen.insert(i).second) fail(Errc::duplicate_index, "index " + std::to_string(i) + " repeated");
    }
    if (indices.size() < minimum)
        fail(too_few, "need at least " + std::to_string(minimum) + " indices, got " +
                          std::to_string(indices.size()));
}

// Horner evaluation of a polynomial given in ascending-coefficient order.
Scalar eval_poly(const Group& g, const std::vector<Scalar>& coeffs, uint32_t x) {
    Scalar at = g.scalar_from_u64(x);
    Scalar acc = g.scalar_zero();
    for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it)
        acc = g.scalar_add(g.scalar_mul(acc, at), *it);
    return acc;
}

std::vector<Scalar> random_poly(const Group& g, const Scalar& constant_term, uint32_t degree, Rng& rng) {
    std::vector<Scalar> coeffs;
    coeffs.reserve(degree + 1);
    coeffs.push_back(constant_term);
    for (uint32_t i = 0; i < degree; ++i) coeffs.push_back(g.scalar_random(rng));
    return coeffs;
}

} // namespace

std::vector<Share> deal_shares(const Group& g, const Scalar& secret, uint32_t threshold,
                               const std::vector<uint32_t>& indices, Rng& rng) {
    check_indices(indices, size_t(threshold) + 1, Errc::insufficient_indices);
    auto coeffs = random_poly(g, secret, threshold, rng);
    std::vector<Share> shares;
    shares.reserve(indices.size());
    for (uint32_t i : indices)
        shares.push_back(Share{i, eval_poly(g, coeffs, i), 0, threshold});
    return shares;
}

std::vector<Scalar> lagrange_at_zero(const Group& g, const std::vector<uint32_t>& indices) {
    check_indices(indices, 1, Errc::insufficient_indices);
    std::vector<Scalar> coeffs;
    coeffs.reserve(indices.size());
    for (uint32_t i : indices) {
        // lambda_i(0) = prod_{m != i} x_m / (x_m - x_i)
        Scalar num = g.scalar_one();
        Scalar den = g.scalar_one();
        Scalar xi = g.scalar_from_u64(i);
        for (uint32_t m : indices) {
            if (m == i) continue;
            Scalar xm = g.scalar_from_u64(m);
            num = g.scalar_mul(num, xm);
            den = g.scalar_mul(den, g.scalar_sub(xm, xi));
        }
        coeffs.push_back(g.scalar_mul(num, g.scalar_invert(den)));
    }
    return coeffs;
}

Scalar reconstruct_secret(const Group& g, const std::vector<Share>& shares) {
    if (shares.empty()) fail(Errc::insufficient_shares, "no shares");
    uint32_t threshold = shares.front().threshold;
    uint64_t epoch = shares.front().epoch;
    std::vector<uint32_t> indices;
    indices.reserve(shares.size());
    for (const Share& s : shares) {
        if (s.epoch != epoch || s.threshold != threshold)
            fail(Errc::epoch_mismatch, "shares from different generations");
        indices.push_back(s.index);
    }
    check_indices(indices, size_t(threshold) + 1, Errc::insufficient_shares);
    auto lambda = lagrange_at_zero(g, indices);
    Scalar acc = g.scalar_zero();
    for (size_t k = 0; k < shares.size(); ++k)
        acc = g.scalar_add(acc, g.scalar_mul(lambda[k], shares[k].value));
    return acc;
}

std::vector<RefreshSubshare> make_refresh_subshares(const Group& g, const Share& share,
                                                    uint32_t new_threshold,
                                                    const std::vector<uint32_t>& new_indices,
                                                    Rng& rng) {
    check_indices(new_indices, size_t(new_threshold) + 1, Errc::insufficient_indices);
    auto coeffs = random_poly(g, share.value, new_threshold, rng);
    std::vector<RefreshSubshare> out;
    out.reserve(new_indices.size());
    for (uint32_t j : new_indices)
        out.push_back(RefreshSubshare{share.index, j, eval_poly(g, coeffs, j), share.epoch,
                                      share.epoch + 1, new_threshold});
    return out;
}

Share combine_subshares(const Group& g, uint32_t to_index,
                        const std::vector<RefreshSubshare>& subshares,
                        const std::vector<uint32_t>& contributor_indices) {
    if (subshares.empty()) fail(Errc::insufficient_subshares, "no subshares");

    std::map<uint32_t, const RefreshSubshare*> by_contributor;
    uint64_t old_epoch = subshares.front().old_epoch;
    uint32_t new_threshold = subshares.front().new_threshold;
    for (const RefreshSubshare& ss : subshares) {
        if (ss.to_index != to_index)
            fail(Errc::misaddressed_subshare,
                 "subshare for index " + std::to_string(ss.to_index) + " delivered to " +
                     std::to_string(to_index));
        if (ss.old_epoch != old_epoch || ss.new_epoch != old_epoch + 1 ||
            ss.new_threshold != new_threshold)
            fail(Errc::mixed_epoch, "subshares from different refresh rounds");
        if (!by_contributor.emplace(ss.from_index, &ss).second)
            fail(Errc::duplicate_index, "two subshares from contributor " + std::to_string(ss.from_index));
    }
    for (uint32_t c : contributor_indices) {
        if (!by_contributor.count(c))
            fail(Errc::insufficient_subshares, "missing subshare from contributor " + std::to_string(c));
    }
    if (by_contributor.size() != contributor_indices.size())
        fail(Errc::misaddressed_subshare, "subshare from outside the contributor set");

    auto lambda = lagrange_at_zero(g, contributor_indices);
    Scalar acc = g.scalar_zero();
    for (size_t k = 0; k < contributor_indices.size(); ++k) {
        const RefreshSubshare& ss = *by_contributor.at(contributor_indices[k]);
        acc = g.scalar_add(acc, g.scalar_mul(lambda[k], ss.value));
    }
    return Share{to_index, acc, old_epoch + 1, new_threshold};
}

} // namespace kintsugi
