#pragma once

#include <cstdint>
#include <vector>

namespace scalpnet {

// splitmix64, used to expand a single 64-bit seed into generator state and
// to derive per-epoch / per-batch sub-seeds.
struct SplitMix64 {
    uint64_t state = 0;

    explicit SplitMix64(uint64_t seed) : state(seed) {}

    uint64_t next() {
        uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }
};

// xoshiro256**, seeded through splitmix64. This generator is part of the
// reproducibility contract: shuffles, splits, weight init and augmentation
// draws all come from it, so runs are identical across platforms for a
// fixed seed.
class Xoshiro256ss {
public:
    explicit Xoshiro256ss(uint64_t seed) {
        SplitMix64 sm(seed);
        for (auto& w : s_) w = sm.next();
    }

    uint64_t next() {
        const uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53 bits of precision.
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform in [0, bound). Plain modulo; the bias is irrelevant here,
    // determinism is what matters.
    uint64_t next_below(uint64_t bound) { return next() % bound; }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t s_[4] = {};
};

// Fisher-Yates shuffle driven by the generator above.
template <typename T>
void fisher_yates_shuffle(std::vector<T>& v, Xoshiro256ss& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(rng.next_below(i));
        std::swap(v[i - 1], v[j]);
    }
}

// Derives an independent sub-seed from (seed, stream index).
inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
    SplitMix64 sm(seed ^ (0x9E3779B97F4A7C15ULL * (stream + 1)));
    return sm.next();
}

}  // namespace scalpnet
