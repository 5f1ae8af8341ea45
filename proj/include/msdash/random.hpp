#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace msdash {

using Rng = std::mt19937_64;

// The standard distributions are implementation-defined, so draws that must be
// reproducible across standard libraries go through these helpers instead.

/// Uniform real in [0, 1) built from the top 53 bits of one engine output.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform real in [lo, hi).
inline double uniform_real(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

/// Uniform integer in [0, n). Modulo bias is below 2^-40 for any n < 2^24.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    return n == 0 ? 0 : rng() % n;
}

/// Engine seeded through std::seed_seq, whose mixing is fully specified.
inline Rng make_rng(std::initializer_list<std::uint64_t> parts) {
    std::vector<std::uint32_t> words;
    for (auto p : parts) {
        words.push_back(static_cast<std::uint32_t>(p & 0xffffffffu));
        words.push_back(static_cast<std::uint32_t>(p >> 32));
    }
    std::seed_seq mixed(words.begin(), words.end());
    return Rng(mixed);
}

} // namespace msdash
