#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace crashcast {

// splitmix64 finalizer; used to mix seeds and derive labeled sub-streams.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Every random decision in the pipeline flows from one base seed split into
// labeled sub-streams, so runs are reproducible and modules cannot perturb
// each other's draws.
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view label) {
    return mix64(base ^ fnv1a64(label));
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) {
    return mix64(base ^ mix64(index));
}

// mt19937_64 with hand-rolled value extraction. The raw engine sequence is
// standard-specified, and avoiding std::*_distribution keeps the streams
// identical across standard library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // (0, 1)
    double uniform_open() {
        return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; the pair is cached so one draw costs half a transform.
    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform_open();
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 2.0 * 3.141592653589793238462643383279502884 * u2;
        cached_ = r * std::sin(theta);
        has_cached_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

    // Unbiased integer in [0, n) by rejection.
    std::size_t index(std::size_t n) {
        if (n <= 1) return 0;
        const std::uint64_t span = static_cast<std::uint64_t>(n);
        const std::uint64_t threshold = (~std::uint64_t{0} - span + 1) % span;
        for (;;) {
            std::uint64_t x = next_u64();
            if (x >= threshold) return static_cast<std::size_t>(x % span);
        }
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = index(i);
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    double cached_ = 0.0;
    bool has_cached_ = false;
};

} // namespace crashcast
