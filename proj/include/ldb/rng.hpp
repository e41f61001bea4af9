#pragma once

#include <cstdint>
#include <vector>

namespace ldb {

/// Counter-based pseudo-random stream.
///
/// Each draw is a pure function of (seed, position), so a stream can be
/// serialized as those two integers and resumed bit-exactly. derive() makes
/// an independent child stream; consumers that must not perturb each other
/// (data shuffling, weight init, layer selection) each get their own child.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed, std::uint64_t position = 0)
        : seed_(seed), position_(position) {}

    /// Next raw 64-bit draw.
    std::uint64_t next_u64() {
        return mix(seed_ + kGamma * ++position_);
    }

    /// Uniform double in [0, 1).
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// n uniform doubles in [0, 1); advances position by n.
    std::vector<double> uniform(std::size_t n) {
        std::vector<double> out(n);
        for (auto& v : out) v = uniform();
        return out;
    }

    /// Integer in [0, bound) by scaling a uniform draw. bound must be > 0.
    std::uint64_t below(std::uint64_t bound) {
        return static_cast<std::uint64_t>(uniform() * static_cast<double>(bound));
    }

    /// Standard normal via Box-Muller; consumes exactly two uniform draws.
    double normal();

    /// Independent child stream keyed by tag.
    RngStream derive(std::uint64_t tag) const {
        return RngStream(mix(mix(seed_ ^ kDeriveSalt) + kGamma * (tag + 1)));
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t position() const { return position_; }

private:
    static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
    static constexpr std::uint64_t kDeriveSalt = 0xd1b54a32d192ed03ULL;

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::uint64_t position_;
};

} // namespace ldb
