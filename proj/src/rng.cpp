#include "ldb/rng.hpp"

#include <cmath>

namespace ldb {

double RngStream::normal() {
    // No caching of the second Box-Muller value: each call maps to exactly
    // two positions of the stream, so (seed, position) restores cleanly.
    double u1 = 1.0 - uniform(); // (0, 1], keeps log() finite
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

} // namespace ldb
