#include "rmfg/rng.hpp"

#include <cmath>

namespace rmfg {

double halton(std::uint64_t index, unsigned base) {
    double f = 1.0;
    double r = 0.0;
    std::uint64_t i = index + 1;  // skip the degenerate 0 term
    while (i > 0) {
        f /= static_cast<double>(base);
        r += f * static_cast<double>(i % base);
        i /= base;
    }
    return r;
}

}  // namespace rmfg
