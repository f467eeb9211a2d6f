#pragma once

// Self-contained seeded randomness. Everything here is a pure function of the
// seed material, so sampled splits, synthetic worlds and oracle verdicts are
// bit-reproducible across runs and platforms (std::uniform_*_distribution is
// implementation-defined, so we do not use it).

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace recjudge::rng {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline uint64_t mix(uint64_t seed, uint64_t salt) {
    return splitmix64(seed ^ splitmix64(salt));
}

// FNV-1a, used both for seed derivation from string ids and for cache keys.
inline uint64_t hash_str(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Stream {
public:
    explicit Stream(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        uint64_t x = state_;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    // Uniform in [0, n). Rejection-free multiply-shift (bias < 2^-64·n).
    uint64_t bounded(uint64_t n) {
        return static_cast<uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller (one value per call; deterministic draw order).
    double gaussian() {
        double u1 = unit();
        double u2 = unit();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

private:
    uint64_t state_;
};

template <typename T>
void shuffle(std::vector<T>& v, Stream& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(rng.bounded(i));
        std::swap(v[i - 1], v[j]);
    }
}

// First k positions of a seeded Fisher-Yates pass over [0, n); selection order
// is part of the contract (profile sampling renders items in this order).
inline std::vector<size_t> sample_indices(size_t n, size_t k, Stream& rng) {
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    if (k > n) k = n;
    for (size_t i = 0; i < k; ++i) {
        size_t j = i + static_cast<size_t>(rng.bounded(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

}  // namespace recjudge::rng
