#ifndef MOLBO_RNG_HPP
#define MOLBO_RNG_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <unordered_set>
#include <vector>

#include "molbo/hash.hpp"

namespace molbo {

/// Stream tags for the seed-splitting rule. Every random consumer derives its
/// generator as `Rng::stream(seed, tag, index)`, so one top-level seed fixes
/// the whole run.
enum class Stream : std::uint64_t {
    InitialBatch = 1,
    Model = 2,
    Acquisition = 3,
    Diversity = 4,
    Split = 5,
    Synthetic = 6,
};

/// mt19937_64 plus hand-written distributions. The standard library
/// distributions are implementation-defined, so they are avoided to keep
/// traces identical across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// seed' = fmix64(fmix64(fmix64(seed) ^ tag) ^ (index + 0x9e3779b97f4a7c15))
    static Rng stream(std::uint64_t seed, Stream tag, std::uint64_t index = 0) {
        return Rng(derive(seed, static_cast<std::uint64_t>(tag), index));
    }

    static std::uint64_t derive(std::uint64_t seed, std::uint64_t tag, std::uint64_t index) {
        return fmix64(fmix64(fmix64(seed) ^ tag) ^ (index + 0x9e3779b97f4a7c15ULL));
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
    std::uint64_t uniform_index(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % n;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double normal() {
        double u1;
        do {
            u1 = uniform01();
        } while (u1 <= 0.0);
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[uniform_index(i)]);
        }
    }

    /// k distinct values from [0, n), sorted ascending (Floyd's algorithm, O(k) memory).
    std::vector<std::uint64_t> sample_without_replacement(std::uint64_t n, std::uint64_t k) {
        std::unordered_set<std::uint64_t> chosen;
        chosen.reserve(k * 2);
        std::vector<std::uint64_t> out;
        out.reserve(k);
        for (std::uint64_t j = n - k; j < n; ++j) {
            const std::uint64_t t = uniform_index(j + 1);
            const std::uint64_t pick = chosen.count(t) ? j : t;
            chosen.insert(pick);
            out.push_back(pick);
        }
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    std::mt19937_64 engine_;
};

} // namespace molbo

#endif
