#pragma once

#include <cstdint>

// Deterministic randomness. All generation is a pure function of
// (master_seed, layer, column): we derive one substream seed per (layer,
// column) with a fixed avalanche mixer and run a SplitMix64 stream from it.
// The mixer below is the SplitMix64 finalizer (Steele et al.), chosen once
// and frozen; changing any constant here changes every generated instance.

namespace sparsefact {

inline constexpr std::uint64_t mix64(std::uint64_t x) {
    x ^= x >> 30;
    x *= 0xBF58476D1CE4E5B9ull;
    x ^= x >> 27;
    x *= 0x94D049BB133111EBull;
    x ^= x >> 31;
    return x;
}

// Substream derivation: two mixing rounds fold the layer and column indices
// into the master seed. 0x9E37... is the golden-ratio increment, 0xD1B5...
// the weyl constant from PCG-family streams; both are full-period odd.
inline constexpr std::uint64_t substream_seed(std::uint64_t master,
                                              std::uint64_t layer,
                                              std::uint64_t column) {
    std::uint64_t a = mix64(master ^ (0x9E3779B97F4A7C15ull * (layer + 1)));
    return mix64(a ^ (0xD1B54A32D192ED03ull * (column + 1)));
}

class SplitMix64 {
  public:
    explicit constexpr SplitMix64(std::uint64_t seed) : state_(seed) {}

    constexpr std::uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ull;
        return mix64(state_);
    }

    // Unbiased-enough bounded draw (Lemire multiply-shift); bias is < 2^-32
    // for any n below 2^32, far below anything observable at desk scale.
    constexpr std::uint64_t next_below(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next()) * n) >> 64);
    }

    // Uniform double in [-1, 1); used for seeded start vectors.
    constexpr double next_sym() {
        return static_cast<double>(next() >> 11) * (2.0 / 9007199254740992.0) - 1.0;
    }

  private:
    std::uint64_t state_;
};

}  // namespace sparsefact
