#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace sietrack {

// Seeded random stream built directly on mt19937_64 raw output so every draw
// is bit-identical across platforms and standard libraries. All randomized
// code in the project (initialization, sampling, synthesis) goes through
// this class; distribution algorithms are pinned here, not delegated to
// <random> distribution objects.
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t raw() { return engine_(); }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [lo, hi], inclusive. Unbiased via rejection.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        if (lo > hi) throw std::invalid_argument("Rng::uniform_int: lo > hi");
        const uint64_t range = static_cast<uint64_t>(hi - lo) + 1;
        if (range == 0) return static_cast<int64_t>(engine_());  // full 64-bit range
        const uint64_t limit = UINT64_MAX - UINT64_MAX % range;
        uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return lo + static_cast<int64_t>(x % range);
    }

    // Standard normal via Box-Muller; one value per call, the pair partner
    // is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1, u2;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Normal truncated to +-2 standard deviations (resampled outside).
    double truncated_normal(double mean, double stddev) {
        double z;
        do {
            z = normal();
        } while (z < -2.0 || z > 2.0);
        return mean + stddev * z;
    }

    // Derives an independent stream, e.g. one per epoch or per sequence.
    Rng spawn(uint64_t stream) {
        // splitmix64 over (raw, stream) keeps spawned streams decorrelated
        uint64_t x = engine_() + 0x9E3779B97F4A7C15ull * (stream + 1);
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
        return Rng(x ^ (x >> 31));
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace sietrack
