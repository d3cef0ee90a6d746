#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>

namespace gridtalk {

// FNV-1a, 64 bit. Used for config hashes, rng stream derivation and
// checkpoint checksums; not cryptographic.
inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t h = 1469598103934665603ull) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 1469598103934665603ull) {
    return fnv1a64(std::string_view(static_cast<const char*>(data), n), h);
}

// Shortest text form that round-trips an IEEE double exactly (17 significant
// digits). All CSV and log output goes through this.
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string hex_u64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace gridtalk
