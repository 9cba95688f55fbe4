#pragma once
// Platform-stable random source. std::uniform_*_distribution is
// implementation-defined, so bounded draws are done by hand on top of
// mt19937_64, whose output sequence is fixed by the standard.

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace kgalign {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform integer in [0, n). n must be > 0.
    std::uint64_t index(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform() < p; }

    // Standard normal via Box-Muller.
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[index(i)]);
        }
    }

    // k distinct indices from [0, n), in draw order (partial Fisher-Yates).
    std::vector<std::size_t> sample(std::size_t n, std::size_t k) {
        std::vector<std::size_t> pool(n);
        for (std::size_t i = 0; i < n; ++i) pool[i] = i;
        if (k > n) k = n;
        for (std::size_t i = 0; i < k; ++i) {
            std::swap(pool[i], pool[i + index(n - i)]);
        }
        pool.resize(k);
        return pool;
    }

    // Derive an independent stream for a sub-task.
    Rng fork(std::uint64_t salt);

private:
    std::mt19937_64 engine_;
};

// Stable 64-bit mix for deriving seeds from (seed, tag) pairs.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (tag + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133CB111ULL;
    return z ^ (z >> 31);
}

inline Rng Rng::fork(std::uint64_t salt) { return Rng(mix_seed(next(), salt)); }

}  // namespace kgalign
