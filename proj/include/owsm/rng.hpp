#pragma once

#include <cstdint>

namespace owsm {

// Counter-based deterministic generator. Every output is a pure function of
// (key, counter), so the draw sequence for a given seed is identical on all
// platforms, and independent streams can be split off without sharing state.
//
// The mixing function is the splitmix64 finalizer; the counter advances by a
// fixed odd gamma so consecutive inputs are well separated.
class SeededRng {
public:
    explicit SeededRng(uint64_t seed) : key_(mix(seed ^ kGamma)) {}

    uint64_t next_u64() {
        counter_ += 1;
        return mix(key_ + kGamma * counter_);
    }

    // Uniform double in [0, 1). Exact integer-to-double scaling, no libm.
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). n must be positive.
    uint64_t uniform_int(uint64_t n) { return next_u64() % n; }

    bool bernoulli(double p) { return uniform() < p; }

    // Derives an independent stream. The child's sequence is a pure function
    // of (parent seed, stream id) and does not consume parent state.
    SeededRng split(uint64_t stream) const {
        SeededRng child(0);
        child.key_ = mix(key_ ^ mix(stream + 0xA5A5B5B5C5C5D5D5ULL));
        child.counter_ = 0;
        return child;
    }

    uint64_t key() const { return key_; }
    uint64_t counter() const { return counter_; }

private:
    static constexpr uint64_t kGamma = 0x9E3779B97F4A7C15ULL;

    static uint64_t mix(uint64_t z) {
        z += kGamma;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    uint64_t key_;
    uint64_t counter_ = 0;
};

} // namespace owsm
