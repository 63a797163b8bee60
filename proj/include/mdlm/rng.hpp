#pragma once

#include <cmath>
#include <cstdint>

#include "mdlm/common.hpp"

namespace mdlm {

// Seeded random stream (xoshiro256++ with splitmix64 seeding).
//
// std::mt19937 itself is portable but the std distributions are not, so all
// sampling lives here. Every stochastic operation in the project takes one of
// these streams explicitly; forked child streams are independent of the
// parent's draw position, which keeps concurrent consumers deterministic.
class RngStream {
public:
    explicit RngStream(uint64_t seed) : seed_(seed) {
        uint64_t x = seed;
        for (auto& w : state_) {
            w = splitmix64(x);
        }
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    bool bernoulli(double p) { return uniform01() < p; }

    // Exact uniform over {0, ..., n-1} via bitmask rejection.
    uint64_t uniform_below(uint64_t n) {
        require(n >= 1, ErrorCategory::domain, "uniform_below: n must be >= 1");
        if (n == 1) {
            return 0;
        }
        uint64_t mask = ~uint64_t{0} >> __builtin_clzll(n - 1);
        uint64_t r;
        do {
            r = next_u64() & mask;
        } while (r >= n);
        return r;
    }

    // Standard normal, Box-Muller with cached spare.
    double gauss() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform01(); // (0, 1], keeps log finite
        const double u2 = uniform01();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 6.283185307179586 * u2;
        spare_ = radius * std::sin(angle);
        has_spare_ = true;
        return radius * std::cos(angle);
    }

    // Independent child stream; depends only on the parent's seed and the id,
    // never on how many draws the parent has made.
    RngStream fork(uint64_t stream_id) const {
        uint64_t x = seed_ ^ (0x9E3779B97F4A7C15ull * (stream_id + 1));
        return RngStream(splitmix64(x) ^ stream_id);
    }

    uint64_t seed() const { return seed_; }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    static uint64_t splitmix64(uint64_t& x) {
        x += 0x9E3779B97F4A7C15ull;
        uint64_t z = x;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    uint64_t seed_;
    uint64_t state_[4];
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace mdlm
