#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace nmtattack {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic random stream. Raw bits come from std::mt19937_64 (whose
// output sequence is fixed by the standard); all distributions are derived
// here rather than via std:: distribution objects, so two builds of this
// repo produce identical draws.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Substream seed for item `index` under a run-level seed.
    static std::uint64_t split(std::uint64_t seed, std::uint64_t index) {
        return splitmix64(seed ^ splitmix64(index + 0x51ed2701));
    }

    std::uint64_t next_u64() { return engine_(); }

    // [0, 1)
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // (0, 1), both endpoints excluded
    double uniform_open() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; the paired draw is discarded to keep the stream layout flat.
    double normal() {
        double u1 = uniform_open();
        double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Standard Gumbel(0,1): -ln(-ln U)
    double gumbel() { return -std::log(-std::log(uniform_open())); }

    // Unbiased integer in [0, n)
    int uniform_int(int n) {
        const std::uint64_t bound = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x = next_u64();
        while (x >= limit) x = next_u64();
        return static_cast<int>(x % bound);
    }

  private:
    std::mt19937_64 engine_;
};

}  // namespace nmtattack
