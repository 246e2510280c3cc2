#pragma once

#include <cmath>
#include <cstdint>

namespace frametwin {

// Counter-based random stream: each draw is a pure function of
// (seed, stream, index), so parallel evaluation order cannot change
// the sampled sequence.
class CounterRng {
  public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t bits(std::uint64_t stream, std::uint64_t index) const {
        std::uint64_t x = seed_;
        x = mix(x ^ mix(stream + 0x9e3779b97f4a7c15ull));
        x = mix(x ^ mix(index + 0xbf58476d1ce4e5b9ull));
        return x;
    }

    // Uniform in [0,1).
    double uniform(std::uint64_t stream, std::uint64_t index) const {
        return static_cast<double>(bits(stream, index) >> 11) * 0x1.0p-53;
    }

    // Uniform in [lo,hi).
    double uniform(std::uint64_t stream, std::uint64_t index, double lo, double hi) const {
        return lo + (hi - lo) * uniform(stream, index);
    }

    // Standard normal via Box-Muller.
    double normal(std::uint64_t stream, std::uint64_t index) const {
        double u1 = uniform(stream, 2 * index);
        double u2 = uniform(stream, 2 * index + 1);
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    std::uint64_t seed() const { return seed_; }

  private:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
};

}  // namespace frametwin
