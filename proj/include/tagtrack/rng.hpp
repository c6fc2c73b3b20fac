#pragma once

#include <cmath>
#include <cstdint>

namespace tagtrack {

// Deterministic RNG with a fixed bit-level algorithm (splitmix64 seeding,
// xoshiro256++ core, Box-Muller normals) so sampled values do not depend on
// the standard library implementation.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t s = seed;
        for (auto& word : state_) word = splitmix64(s);
        cached_valid_ = false;
    }

    uint64_t next_u64() {
        uint64_t* s = state_;
        uint64_t result = rotl(s[0] + s[3], 23) + s[0];
        uint64_t t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = rotl(s[3], 45);
        return result;
    }

    // uniform in [0,1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // standard normal via Box-Muller
    double normal() {
        if (cached_valid_) {
            cached_valid_ = false;
            return cached_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        cached_valid_ = true;
        return r * std::cos(a);
    }

    // derive an independent stream, e.g. per (step, pair) pairs
    static uint64_t derive(uint64_t seed, uint64_t a, uint64_t b = 0, uint64_t c = 0) {
        uint64_t s = seed;
        s = splitmix64_mix(s + 0x9e3779b97f4a7c15ULL * (a + 1));
        s = splitmix64_mix(s + 0x9e3779b97f4a7c15ULL * (b + 1));
        s = splitmix64_mix(s + 0x9e3779b97f4a7c15ULL * (c + 1));
        return s;
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    static uint64_t splitmix64(uint64_t& s) {
        s += 0x9e3779b97f4a7c15ULL;
        return splitmix64_mix(s);
    }

    static uint64_t splitmix64_mix(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    uint64_t state_[4];
    double cached_ = 0.0;
    bool cached_valid_ = false;
};

}  // namespace tagtrack
