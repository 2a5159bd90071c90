#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string_view>

#include "kintsugi/bytes.hpp"

namespace kintsugi {

// All randomness used by the protocol flows through this interface so that
// simulator runs are reproducible from a seed.
class Rng {
public:
    virtual ~Rng() = default;
    virtual void fill(std::span<uint8_t> out) = 0;

    uint64_t next_u64();
    // Unbiased draw from [0, bound); bound must be nonzero.
    uint64_t below(uint64_t bound);
    Bytes bytes(size_t n);
};

// Kernel-backed randomness for daemon and CLI use.
class SystemRng final : public Rng {
public:
    void fill(std::span<uint8_t> out) override;
};

// ChaCha20 keystream keyed from (seed, label). Distinct labels give
// independent streams, so adding a consumer does not perturb the others.
class DeterministicRng final : public Rng {
public:
    DeterministicRng(uint64_t seed, std::string_view label);
    void fill(std::span<uint8_t> out) override;

private:
    std::array<uint8_t, 32> key_{};
    uint64_t counter_ = 0;
    std::array<uint8_t, 64> block_{};
    size_t avail_ = 0;
};

} // namespace kintsugi
