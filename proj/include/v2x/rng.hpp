#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace v2x {

using Rng = std::mt19937_64;

/// Derives independent generator streams from one root seed. Every subsystem
/// asks for its own stream by name (plus optional indices), so adding draws in
/// one subsystem never shifts the sequence seen by another.
class RngStreams {
public:
    explicit RngStreams(std::uint64_t root_seed) : root_(root_seed) {}

    std::uint64_t root() const { return root_; }

    Rng stream(std::string_view name, std::uint64_t i = 0, std::uint64_t j = 0) const {
        std::uint64_t h = 1469598103934665603ull; // FNV-1a over the name
        for (char c : name) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ull;
        }
        std::seed_seq seq{lo(root_), hi(root_), lo(h), hi(h), lo(i), hi(i), lo(j), hi(j)};
        return Rng(seq);
    }

private:
    static std::uint32_t lo(std::uint64_t v) { return static_cast<std::uint32_t>(v); }
    static std::uint32_t hi(std::uint64_t v) { return static_cast<std::uint32_t>(v >> 32); }

    std::uint64_t root_;
};

/// Uniform draw on [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Poisson draw by CDF inversion of a single uniform. One uniform per draw keeps
/// streams aligned across runs that differ only in the mean, and makes the
/// draw monotone in the mean for a fixed uniform.
inline unsigned poisson_from_uniform(double mean, double u) {
    if (mean <= 0.0) return 0;
    double p = std::exp(-mean);
    double cdf = p;
    unsigned k = 0;
    while (u >= cdf && k < 10000) {
        ++k;
        p *= mean / k;
        cdf += p;
        if (p == 0.0) break;
    }
    return k;
}

} // namespace v2x
