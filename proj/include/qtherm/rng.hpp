#pragma once

// Counter-based random streams. Every stream is keyed by
// (seed, shot_index, stage), so shot generation is a pure function of
// the key and is bit-identical under any worker count.

#include <cmath>
#include <cstdint>

namespace qtherm::rng {

// SplitMix64 finalizer; bijective on 64-bit words.
inline constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Stream {
  public:
    Stream(std::uint64_t seed, std::uint64_t shot, std::uint64_t stage)
        : state_(mix64(mix64(mix64(seed) + shot) + stage)) {}

    explicit Stream(std::uint64_t seed) : Stream(seed, 0, 0) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix64(state_);
    }

    // Uniform in (0, 1); never returns exactly 0 so it is safe under log().
    double uniform() {
        return ((next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller; the spare is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

  private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace qtherm::rng
