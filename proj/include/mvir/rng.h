#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include "mvir/array.h"

namespace mvir {

// Deterministic, platform-independent PRNG (xoshiro256**). std distributions
// are implementation-defined, so uniform/normal draws are generated here
// directly to keep runs byte-reproducible across toolchains.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        // splitmix64 expansion of the seed into the xoshiro state
        uint64_t x = seed;
        for (auto& si : s_) {
            x += 0x9e3779b97f4a7c15ULL;
            uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            si = z ^ (z >> 31);
        }
    }

    uint64_t next_u64() {
        auto rotl = [](uint64_t v, int k) { return (v << k) | (v >> (64 - k)); };
        uint64_t result = rotl(s_[1] * 5, 7) * 9;
        uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Integer in [0, n).
    uint64_t below(uint64_t n) { return next_u64() % n; }

    // Standard normal via Box-Muller.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform(), u2 = uniform();
        while (u1 <= 1e-300)
            u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    Vec3 unit_vector() {
        // uniform on the sphere
        double z = uniform(-1.0, 1.0);
        double phi = uniform(0.0, 2.0 * M_PI);
        double r = std::sqrt(std::max(0.0, 1.0 - z * z));
        return {r * std::cos(phi), r * std::sin(phi), z};
    }

    // Uniform random rotation from a random unit quaternion.
    Mat3 rotation() {
        double q[4];
        double n2 = 0;
        do {
            n2 = 0;
            for (double& qi : q) {
                qi = normal();
                n2 += qi * qi;
            }
        } while (n2 < 1e-12);
        double inv = 1.0 / std::sqrt(n2);
        double w = q[0] * inv, x = q[1] * inv, y = q[2] * inv, z = q[3] * inv;
        Mat3 R;
        R.m = {1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),
               2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
               2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y)};
        return R;
    }

private:
    uint64_t s_[4];
    bool have_spare_ = false;
    double spare_ = 0;
};

// Derives an independent stream from a master seed and a stream name, so the
// consumers of randomness (init, ray-sampling, synth-noise, ...) stay
// decoupled: adding draws to one stream does not shift any other.
inline Rng named_stream(uint64_t master_seed, std::string_view name) {
    uint64_t h = 1469598103934665603ULL ^ master_seed;
    for (char c : name) {
        h ^= static_cast<uint8_t>(c);
        h *= 1099511628211ULL;
    }
    return Rng(h);
}

} // namespace mvir
