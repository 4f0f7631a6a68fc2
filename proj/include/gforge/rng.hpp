#pragma once
// Deterministic random source. All randomness in the project flows through
// RandomSource so that runs are reproducible bit-for-bit across platforms;
// std:: distributions are avoided because their outputs are
// implementation-defined.

#include <cstdint>
#include <string_view>
#include <vector>

namespace gforge {

// FNV-1a, used for stable string hashing (context buckets, stream derivation).
inline uint64_t fnv1a(std::string_view s, uint64_t h = 0xcbf29ce484222325ull) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t mix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Counter-based splitmix64 stream. Two sources constructed with the same
// (seed, stream_id) yield the same draw sequence on every platform.
class RandomSource {
public:
    RandomSource(uint64_t seed, uint64_t stream_id)
        : seed_(seed), stream_id_(stream_id),
          state_(mix64(seed ^ mix64(stream_id ^ 0x6a09e667f3bcc908ull))) {}

    uint64_t seed() const { return seed_; }
    uint64_t stream_id() const { return stream_id_; }

    uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Unbiased uniform integer in [0, n).
    uint64_t next_below(uint64_t n) {
        if (n <= 1) return 0;
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return x % n;
    }

    // Child stream keyed by a label and an index; independent of draws made
    // on the parent, so fan-out order cannot change results.
    RandomSource derive(std::string_view label, uint64_t k = 0) const {
        return RandomSource(seed_, mix64(stream_id_ ^ fnv1a(label)) + k);
    }

    // Partial Fisher-Yates: first `take` slots of a shuffled [0, n) index set.
    std::vector<size_t> sample_indices(size_t n, size_t take) {
        std::vector<size_t> idx(n);
        for (size_t i = 0; i < n; ++i) idx[i] = i;
        if (take > n) take = n;
        for (size_t i = 0; i < take; ++i) {
            size_t j = i + static_cast<size_t>(next_below(n - i));
            std::swap(idx[i], idx[j]);
        }
        idx.resize(take);
        return idx;
    }

    void shuffle(std::vector<size_t>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t seed_;
    uint64_t stream_id_;
    uint64_t state_;
};

}  // namespace gforge
