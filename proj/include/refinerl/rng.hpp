#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string_view>

namespace rfl {

// Deterministic, platform-independent randomness. The standard engines are
// portable but the standard distributions are not, so the few distributions
// we need are implemented here and never change behind our backs.

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// xoshiro256++ seeded through splitmix64.
class Rng {
  public:
    explicit Rng(uint64_t seed) {
        uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    uint64_t u64() {
        const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // [0, 1), 53-bit resolution.
    double uniform01() { return double(u64() >> 11) * 0x1.0p-53; }

    // Inclusive [lo, hi], unbiased via rejection.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        if (lo > hi) throw std::invalid_argument("uniform_int: lo > hi");
        const uint64_t span = uint64_t(hi) - uint64_t(lo) + 1;
        if (span == 0) return int64_t(u64());  // full 64-bit range
        const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        uint64_t x;
        do {
            x = u64();
        } while (x >= limit);
        return lo + int64_t(x % span);
    }

    // Box-Muller; draws two uniforms per call, no cached spare.
    double normal(double mean = 0.0, double sd = 1.0) {
        const double u1 = 1.0 - uniform01();  // (0, 1]
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + sd * r * std::cos(2.0 * M_PI * u2);
    }

  private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t s_[4];
};

// Stateless stream derivation: every subsystem draws from its own named
// stream keyed by (master, tag, indices), so consuming randomness in one
// place never shifts another's sequence.
inline uint64_t derive_seed(uint64_t master, std::string_view tag, uint64_t a = 0,
                            uint64_t b = 0, uint64_t c = 0) {
    uint64_t state = master ^ fnv1a64(tag);
    uint64_t seed = splitmix64(state);
    state ^= a * 0x9e3779b97f4a7c15ULL;
    seed ^= splitmix64(state);
    state ^= b * 0xbf58476d1ce4e5b9ULL;
    seed ^= splitmix64(state);
    state ^= c * 0x94d049bb133111ebULL;
    seed ^= splitmix64(state);
    return seed;
}

inline Rng derive_rng(uint64_t master, std::string_view tag, uint64_t a = 0,
                      uint64_t b = 0, uint64_t c = 0) {
    return Rng(derive_seed(master, tag, a, b, c));
}

}  // namespace rfl
