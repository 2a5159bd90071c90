#pragma once

#include <array>
#include <initializer_list>

#include "kintsugi/bytes.hpp"

namespace kintsugi {

// Domain-separation tags. Every hash and signature context gets its own tag
// so byte strings are never interpretable under two roles.
inline constexpr std::string_view kDomainPassword = "kintsugi/pwd";
inline constexpr std::string_view kDomainKdf = "kintsugi/kdf";
inline constexpr std::string_view kSigDirectoryEntry = "kintsugi/dir-entry";
inline constexpr std::string_view kSigDirective = "kintsugi/directive";
inline constexpr std::string_view kSigComplete = "kintsugi/complete";
inline constexpr std::string_view kSigRegister = "kintsugi/register";

// SHA-512 over (len(tag) as one byte || tag || parts...). The single wide
// hash backs both hash-to-group and the backup KDF.
std::array<uint8_t, 64> hash512(std::string_view domain_tag, std::initializer_list<ByteSpan> parts);

inline std::array<uint8_t, 64> hash512(std::string_view domain_tag, ByteSpan part) {
    return hash512(domain_tag, {part});
}

} // namespace kintsugi
