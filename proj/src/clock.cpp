#include "kintsugi/clock.hpp"

#include <chrono>

namespace kintsugi {

uint64_t SystemClock::now() const {
    return uint64_t(std::chrono::duration_cast<std::chrono::seconds>(
                        std::chrono::system_clock::now().time_since_epoch())
                        .count());
}

} // namespace kintsugi
