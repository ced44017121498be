#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace situ {

// FNV-1a, 64 bit. Used to tie artifacts to the configuration and checkpoints
// that produced them.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex_digest(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace situ
