#ifndef DIPDEF_RNG_HPP
#define DIPDEF_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>

namespace dipdef {

// Deterministic random source. Distributions are hand-derived from the raw
// mt19937 stream because std::uniform_real_distribution is allowed to differ
// between standard library implementations, and traces must be reproducible
// bit-for-bit from a seed.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(static_cast<std::uint32_t>(seed ^ (seed >> 32))) {}

    // Uniform in [0, 1) with 24 bits of mantissa.
    float uniform() { return static_cast<float>(eng_() >> 8) * 0x1p-24f; }

    float uniform(float lo, float hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller, one value per call (the pair's second half is cached).
    float normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        float u1 = uniform(), u2 = uniform();
        while (u1 <= 1e-12f) u1 = uniform();
        const float r = std::sqrt(-2.0f * std::log(u1));
        const float a = 6.28318530717958647692f * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    std::uint32_t next_u32() { return eng_(); }

    // Unbiased-enough integer draw for shuffles and subset picks.
    std::size_t index(std::size_t n) { return static_cast<std::size_t>(eng_() % n); }

  private:
    std::mt19937 eng_;
    float spare_ = 0.0f;
    bool has_spare_ = false;
};

// Mixes a base seed with a stream id so each image / component gets an
// independent deterministic stream (splitmix64 finalizer).
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

}  // namespace dipdef

#endif
