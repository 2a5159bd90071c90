#pragma once

#include <sodium.h>

#include "kintsugi/errors.hpp"

namespace kintsugi {

inline void ensure_sodium() {
    static const int rc = sodium_init();
    if (rc < 0) fail(Errc::internal, "sodium_init failed");
}

} // namespace kintsugi
