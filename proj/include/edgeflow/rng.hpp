// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string_view>

namespace edgeflow {

// Deterministic xorshift-family generator (splitmix64 seeding + xorshift64*).
// Used everywhere randomness is needed so that schemes, inputs and parameter
// values are reproducible bit-for-bit across runs and platforms.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(splitmix(seed ^ 0x9e3779b97f4a7c15ull)) {
        if (state_ == 0) state_ = 0x853c49e6748fea9bull;
    }

    uint64_t next() {
        uint64_t x = state_;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        state_ = x;
        return x * 0x2545f4914f6cdd1dull;
    }

    // Unbiased-enough for test-scale bounds; bound must be > 0.
    uint64_t below(uint64_t bound) { return next() % bound; }

    // Uniform in [lo, hi], 53-bit resolution.
    double uniform(double lo, double hi) {
        double u = static_cast<double>(next() >> 11) * (1.0 / 9007199254740992.0);
        return lo + u * (hi - lo);
    }

    static uint64_t splitmix(uint64_t x) {
        x += 0x9e3779b97f4a7c15ull;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
        return x ^ (x >> 31);
    }

private:
    uint64_t state_ = 1;
};

// FNV-1a, used to derive independent value streams per named entity
// (parameter tags, graph inputs) from one user-facing seed.
inline uint64_t hashTag(std::string_view tag) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

inline Rng taggedRng(uint64_t seed, std::string_view tag) {
    return Rng(Rng::splitmix(seed) ^ hashTag(tag));
}

} // namespace edgeflow
