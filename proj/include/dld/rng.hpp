/// @file rng.hpp
/// @brief Seeded RNG with a fixed uint64 -> double mapping, so streams are
///        reproducible independent of the standard library's distributions.

#pragma once

#include <cstdint>
#include <random>

namespace dld {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random mantissa bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // modulo bias is irrelevant at the sizes used here (n << 2^64)
        return engine_() % n;
    }

private:
    std::mt19937_64 engine_;
};

/// In-place Fisher-Yates with the stream above (std::shuffle is not
/// reproducible across standard libraries).
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

}  // namespace dld
