#pragma once

// Deterministic random number generation. std:: distributions are
// implementation-defined, so everything here is hand-rolled to keep
// output files byte-identical across platforms and reruns.

#include <cstdint>
#include <cmath>

namespace artgrasp {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Stateless mix of a seed and a counter, for per-pixel noise.
inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t counter) {
    std::uint64_t s = seed ^ (counter * 0xff51afd7ed558ccdULL + 0x2545f4914f6cdd1dULL);
    return splitmix64(s);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : state_(seed) {
        // burn a few outputs so nearby seeds decorrelate
        splitmix64(state_);
        splitmix64(state_);
    }

    std::uint64_t next_u64() { return splitmix64(state_); }

    std::uint32_t next_u32() { return static_cast<std::uint32_t>(next_u64() >> 32); }

    // uniform in [0,1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n)
    std::uint64_t uniform_index(std::uint64_t n) {
        // modulo bias is negligible for n << 2^64
        return n == 0 ? 0 : next_u64() % n;
    }

    // standard normal via Box-Muller (pair cached)
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 1e-300) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // child generator with an independent stream
    Rng fork(std::uint64_t stream) {
        return Rng(next_u64() ^ hash_combine(0x5bd1e995u, stream));
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

// One normal draw from a stateless hash (used by the depth-noise model,
// where each pixel must be independent of evaluation order).
inline double hashed_normal(std::uint64_t seed, std::uint64_t counter) {
    std::uint64_t h = hash_combine(seed, counter);
    std::uint64_t h2 = hash_combine(seed ^ 0x9e3779b97f4a7c15ULL, counter);
    double u1 = static_cast<double>(h >> 11) * 0x1.0p-53;
    double u2 = static_cast<double>(h2 >> 11) * 0x1.0p-53;
    if (u1 <= 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(6.283185307179586476925286766559 * u2);
}

inline double hashed_uniform(std::uint64_t seed, std::uint64_t counter) {
    return static_cast<double>(hash_combine(seed, counter) >> 11) * 0x1.0p-53;
}

} // namespace artgrasp
