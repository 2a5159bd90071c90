#pragma once

#include <cstdint>

namespace kintsugi {

// Seconds-resolution time source; the simulator substitutes virtual ticks so
// rate-limit windows elapse instantly in tests.
class Clock {
public:
    virtual ~Clock() = default;
    virtual uint64_t now() const = 0;
};

class SystemClock final : public Clock {
public:
    uint64_t now() const override;
};

class SimClock final : public Clock {
public:
    uint64_t now() const override { return t_; }
    void advance(uint64_t dt) { t_ += dt; }
    void set(uint64_t t) { t_ = t; }

private:
    uint64_t t_ = 0;
};

} // namespace kintsugi
