#pragma once

#include <cstdint>
#include <vector>

#include "kintsugi/group.hpp"

namespace kintsugi {

// One node's Shamir share. Shares may only be combined with equal epoch and
// threshold; the epoch tag is what turns a stale share into a checked error
// instead of a silently wrong reconstruction.
struct Share {
    uint32_t index = 0; // interpolation abscissa, >= 1
    Scalar value;
    uint64_t epoch = 0;
    uint32_t threshold = 0;

    friend bool operator==(const Share&, const Share&) = default;
};

// SSS'_i(j): contribution from old node i toward new node j during a
// proactive refresh. The constant term of SSS'_i is i's old share, so
// subshares are as sensitive as shares and travel only in sealed envelopes.
struct RefreshSubshare {
    uint32_t from_index = 0;
    uint32_t to_index = 0;
    Scalar value;
    uint64_t old_epoch = 0;
    uint64_t new_epoch = 0;
    uint32_t new_threshold = 0;

    friend bool operator==(const RefreshSubshare&, const RefreshSubshare&) = default;
};

// Fresh degree-t polynomial with constant term `secret`, evaluated at each
// index. Requires |indices| >= t+1 distinct indices >= 1. Shares carry epoch 0.
std::vector<Share> deal_shares(const Group& g, const Scalar& secret, uint32_t threshold,
                               const std::vector<uint32_t>& indices, Rng& rng);

// Lagrange coefficients at zero for the given abscissae, in input order.
// sum(lambda_i * f(x_i)) = f(0) for every polynomial of degree < |indices|.
std::vector<Scalar> lagrange_at_zero(const Group& g, const std::vector<uint32_t>& indices);

// Interpolates the constant term from >= threshold+1 shares with matching
// epoch and threshold and distinct indices.
Scalar reconstruct_secret(const Group& g, const std::vector<Share>& shares);

// Old node i's half of a refresh: a fresh degree-t_new polynomial with its
// current share as the constant term, evaluated at every new index.
std::vector<RefreshSubshare> make_refresh_subshares(const Group& g, const Share& share,
                                                    uint32_t new_threshold,
                                                    const std::vector<uint32_t>& new_indices,
                                                    Rng& rng);

// New node j's half: interpolate the received subshares over the agreed
// contributor set. Every new node must use the identical contributor set or
// the refreshed shares will not lie on one polynomial.
Share combine_subshares(const Group& g, uint32_t to_index,
                        const std::vector<RefreshSubshare>& subshares,
                        const std::vector<uint32_t>& contributor_indices);

} // namespace kintsugi
