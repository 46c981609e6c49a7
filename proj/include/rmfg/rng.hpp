#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace rmfg {

// 64-bit mixer used to derive independent stream seeds from (root seed, label).
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

// Deterministic per-stream generator. Normals come from an explicit
// Box-Muller transform so the byte-level output does not depend on the
// standard library's distribution implementation.
class StreamRng {
public:
    StreamRng(std::uint64_t seed, std::uint64_t stream) : engine_(mix_seed(seed, stream)) {}

    // uniform on (0,1)
    double uniform() {
        const std::uint64_t bits = engine_() >> 11;  // 53 random bits
        double u = static_cast<double>(bits) * 0x1.0p-53;
        if (u <= 0.0) u = 0x1.0p-53;
        return u;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    // uniform integer in [0, n)
    std::uint64_t uniform_index(std::uint64_t n) {
        return engine_() % n;
    }

private:
    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// Halton low-discrepancy sequence, used for sampled assumption sweeps.
double halton(std::uint64_t index, unsigned base);

}  // namespace rmfg
