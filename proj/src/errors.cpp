#include "kintsugi/errors.hpp"

namespace kintsugi {

const char* errc_name(Errc c) {
    switch (c) {
    case Errc::zero_inverse: return "ZeroInverse";
    case Errc::malformed_element: return "MalformedElement";
    case Errc::insufficient_indices: return "InsufficientIndices";
    case Errc::duplicate_index: return "DuplicateIndex";
    case Errc::insufficient_shares: return "InsufficientShares";
    case Errc::epoch_mismatch: return "EpochMismatch";
    case Errc::insufficient_subshares: return "InsufficientSubshares";
    case Errc::mixed_epoch: return "MixedEpoch";
    case Errc::misaddressed_subshare: return "MisaddressedSubshare";
    case Errc::insufficient_responses: return "InsufficientResponses";
    case Errc::unknown_index: return "UnknownIndex";
    case Errc::decryption_failed: return "DecryptionFailed";
    case Errc::bad_signature: return "BadSignature";
    case Errc::stale_version: return "StaleVersion";
    case Errc::key_mismatch: return "KeyMismatch";
    case Errc::not_found: return "NotFound";
    case Errc::duplicate_user: return "DuplicateUser";
    case Errc::bad_authorization: return "BadAuthorization";
    case Errc::rate_limited: return "RateLimited";
    case Errc::unknown_user: return "UnknownUser";
    case Errc::corrupt_state: return "CorruptState";
    case Errc::malformed_message: return "MalformedMessage";
    case Errc::frame_too_large: return "FrameTooLarge";
    case Errc::connection_closed: return "ConnectionClosed";
    case Errc::node_rejected: return "NodeRejected";
    case Errc::directory_rejected: return "DirectoryRejected";
    case Errc::insufficient_contributors: return "InsufficientContributors";
    case Errc::scenario_error: return "ScenarioError";
    case Errc::cancelled: return "Cancelled";
    case Errc::internal: return "InternalError";
    }
    return "UnknownError";
}

} // namespace kintsugi
