#pragma once

#include <cstdint>
#include <random>

#include "aen/common.hpp"

namespace aen {

// Deterministic random source. All draws are derived from raw mt19937 words
// (whose sequence the standard pins down exactly), never from
// std::*_distribution, so identical seeds give identical streams on every
// platform and standard library.
class Rng {
public:
    explicit Rng(std::uint64_t seed)
        : gen_(static_cast<std::uint32_t>(seed ^ (seed >> 32))) {}

    std::uint32_t next_u32() { return gen_(); }

    // Uniform in [0, 1) with 24 bits of resolution.
    double uniform() { return (next_u32() >> 8) * (1.0 / 16777216.0); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n), rejection-sampled so every value is equally
    // likely.
    std::size_t below(std::size_t n) {
        if (n == 0) throw ContractError("Rng::below: n must be positive");
        const std::uint64_t span = std::uint64_t(1) << 32;
        const std::uint64_t bound = span - span % n;
        std::uint64_t r = next_u32();
        while (r >= bound) r = next_u32();
        return static_cast<std::size_t>(r % n);
    }

    // Fisher-Yates; element order depends only on the seed and n.
    template <typename V>
    void shuffle(V& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = below(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937 gen_;
};

}  // namespace aen
