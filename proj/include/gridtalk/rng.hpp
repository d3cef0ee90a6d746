#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

#include "util.hpp"

namespace gridtalk {

// Deterministic random stream. All randomness in the project flows through
// named streams derived from a single root seed, so that e.g. environment
// resets and exploration draws never interleave across purposes.
//
// Sampling helpers are hand-rolled on top of mt19937_64 because
// std::uniform_*_distribution is not guaranteed to produce the same sequence
// across standard library implementations.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : engine_(seed) {}

    static RngStream child(std::uint64_t root_seed, std::string_view name) {
        std::uint64_t h = fnv1a64(name);
        h ^= root_seed + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        return RngStream(h);
    }

    std::uint64_t next_u64() { return engine_(); }

    // [0, 1), 53 bits of mantissa
    double next_double() { return (engine_() >> 11) * 0x1.0p-53; }

    // [0, n). Modulo bias is below 2^-59 for n <= 32, far below anything
    // observable at our sample sizes.
    int next_index(int n) {
        if (n <= 0) throw std::logic_error("next_index: n must be positive");
        return static_cast<int>(engine_() % static_cast<std::uint64_t>(n));
    }

    std::string save_state() const {
        std::ostringstream os;
        os << engine_;
        return os.str();
    }

    void load_state(const std::string& s) {
        std::istringstream is(s);
        is >> engine_;
        if (is.fail()) throw std::runtime_error("RngStream: bad serialized state");
    }

    friend bool operator==(const RngStream& a, const RngStream& b) {
        return a.engine_ == b.engine_;
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace gridtalk
