#pragma once

#include <cstdint>
#include <random>

namespace nsb {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Seed of stream `index` under `master`. Fixed so that results are reproducible for any
// worker count.
inline uint64_t derive_seed(uint64_t master, uint64_t index) {
    return splitmix64(splitmix64(master) ^ splitmix64(index + 0x632be59bd9b4e019ULL));
}

class Rng {
public:
    explicit Rng(uint64_t seed) : eng_(seed) {}

    // Uniform on the open interval (0, 1).
    double uniform() {
        return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
    }

    uint64_t next() { return eng_(); }

    // Uniform integer in [0, n).
    uint64_t below(uint64_t n) {
        return static_cast<uint64_t>(uniform() * static_cast<double>(n)) % n;
    }

    Rng split(uint64_t index) const { return Rng(derive_seed(seed_hint_(), index)); }

private:
    std::mt19937_64 eng_;

    uint64_t seed_hint_() const {
        auto copy = eng_;
        return copy();
    }
};

}  // namespace nsb
