#pragma once

#include <cmath>
#include <cstdint>

namespace mcf {

// SplitMix64 step; used both as a hash mixer and to seed the main engine.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Order-sensitive seed derivation, e.g. hash_seed(global, example, replicate).
inline uint64_t hash_seed(uint64_t a, uint64_t b) {
    uint64_t s = a;
    uint64_t h = splitmix64(s);
    s ^= b + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    return splitmix64(s);
}

inline uint64_t hash_seed(uint64_t a, uint64_t b, uint64_t c) {
    return hash_seed(hash_seed(a, b), c);
}

// xoshiro256** with hand-rolled distributions. The standard library engines
// are portable but its distributions are not, and sampled corruption must be
// reproducible bit-for-bit from a seed.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t s = seed;
        for (auto& word : state_) word = splitmix64(s);
    }

    uint64_t next() {
        const uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1); safe as a log/inverse-CDF argument.
    double uniform_open() {
        double u;
        do {
            u = uniform();
        } while (u <= 0.0);
        return u;
    }

    // Uniform integer in [0, n).
    uint64_t uniform_int(uint64_t n) {
        // Rejection to avoid modulo bias.
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v;
        do {
            v = next();
        } while (v >= limit);
        return v % n;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller, one variate per call.
    double normal(double mean, double stddev) {
        const double u1 = uniform_open();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(6.283185307179586477 * u2);
    }

    // Location mu, scale b (variance 2*b^2), via inverse CDF.
    double laplace(double mu, double b) {
        const double u = uniform() - 0.5;
        const double a = 1.0 - 2.0 * std::abs(u);
        const double t = -b * std::log(a > 0.0 ? a : 0x1.0p-53);
        return u >= 0.0 ? mu + t : mu - t;
    }

    // Exact Poisson sampler. Knuth's product method for small rates; larger
    // rates are split additively so the method stays exact.
    uint64_t poisson(double rate) {
        if (rate <= 0.0) return 0;
        uint64_t total = 0;
        while (rate > 30.0) {
            total += poisson_knuth(30.0);
            rate -= 30.0;
        }
        return total + poisson_knuth(rate);
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t poisson_knuth(double rate) {
        const double limit = std::exp(-rate);
        uint64_t k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform();
        } while (p > limit);
        return k - 1;
    }

    uint64_t state_[4];
};

}  // namespace mcf
