#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace kintsugi {

// Stable error identifiers; the numeric value doubles as the wire code in
// ErrorResponse messages, so entries must never be renumbered.
enum class Errc : uint16_t {
    zero_inverse = 1,
    malformed_element = 2,
    insufficient_indices = 3,
    duplicate_index = 4,
    insufficient_shares = 5,
    epoch_mismatch = 6,
    insufficient_subshares = 7,
    mixed_epoch = 8,
    misaddressed_subshare = 9,
    insufficient_responses = 10,
    unknown_index = 11,
    decryption_failed = 12,
    bad_signature = 13,
    stale_version = 14,
    key_mismatch = 15,
    not_found = 16,
    duplicate_user = 17,
    bad_authorization = 18,
    rate_limited = 19,
    unknown_user = 20,
    corrupt_state = 21,
    malformed_message = 22,
    frame_too_large = 23,
    connection_closed = 24,
    node_rejected = 25,
    directory_rejected = 26,
    insufficient_contributors = 27,
    scenario_error = 28,
    cancelled = 29,
    internal = 30,
};

const char* errc_name(Errc c);

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const { return code_; }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) { throw Error(code, what); }

} // namespace kintsugi
