#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "anomsynth/error.hpp"

namespace anomsynth {

// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return mix64(base ^ mix64(stream + 0x510e527fade682d1ull));
}

// Deterministic RNG. mt19937_64 output is fixed by the standard; the
// distribution helpers live here so sequences never depend on libstdc++
// distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // uniform in [0, 1) with 53 random bits
    double next_unit() { return double(eng_() >> 11) * 0x1.0p-53; }

    // unbiased uniform in [0, n)
    std::uint64_t next_below(std::uint64_t n) {
        if (n == 0) throw InvalidArgument("next_below: n must be positive");
        for (;;) {
            std::uint64_t x = eng_();
            std::uint64_t r = x % n;
            if (x - r <= std::uint64_t(0) - n) return r;
        }
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    // inclusive bounds
    int uniform_int(int lo, int hi) {
        return lo + int(next_below(std::uint64_t(hi - lo) + 1));
    }

    bool bernoulli(double p) { return next_unit() < p; }

    double normal(double mean = 0.0, double stddev = 1.0) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + stddev * spare_;
        }
        double u, v, s;
        do {
            u = uniform(-1.0, 1.0);
            v = uniform(-1.0, 1.0);
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return mean + stddev * u * f;
    }

    // Fisher-Yates
    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = std::size_t(next_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace anomsynth
