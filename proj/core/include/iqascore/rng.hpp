#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace iqascore {

/// splitmix64 finalizer. Used to derive independent streams from a seed
/// plus arbitrary key material without sharing mutable state.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::uint64_t value) {
    return mix64(seed ^ (value + 0x9e3779b97f4a7c15ULL + (seed << 6) + (seed >> 2)));
}

inline std::uint64_t hash_combine(std::uint64_t seed, std::string_view text) {
    // FNV-1a over the bytes, then folded into the running seed.
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return hash_combine(seed, h);
}

/// Seeded generator with explicitly-coded bounded draws so that results
/// are reproducible across standard-library implementations
/// (std::uniform_int_distribution is not pinned by the standard,
/// std::mt19937_64 is).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /// Uniform draw in [0, n). n must be positive.
    int below(int n) {
        // rejection sampling to avoid modulo bias
        const std::uint64_t bound = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t v = engine_();
        while (v >= limit) v = engine_();
        return static_cast<int>(v % bound);
    }

    std::size_t index(std::size_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t v = engine_();
        while (v >= limit) v = engine_();
        return static_cast<std::size_t>(v % n);
    }

    /// Uniform double in [0, 1).
    double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform01() < p; }

    /// Draw an index weighted by non-negative weights (sum must be > 0).
    template <typename Container>
    std::size_t weighted(const Container& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double r = uniform01() * total;
        std::size_t last = 0;
        std::size_t i = 0;
        for (double w : weights) {
            if (w > 0.0) {
                last = i;
                if (r < w) return i;
                r -= w;
            }
            ++i;
        }
        return last;
    }

    template <typename T>
    void shuffle(std::vector<T>& values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            std::swap(values[i - 1], values[index(i)]);
        }
    }

private:
    std::mt19937_64 engine_;
};

} // namespace iqascore
