#pragma once

#include <array>
#include <cstdint>

namespace mvsim {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11). Output is a
/// pure function of (key, counter), so any stream position can be evaluated
/// independently by any worker.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    explicit Philox4x32(std::uint64_t seed)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

    Counter operator()(Counter ctr) const;

private:
    Key key_;
};

/// Logical stream families; each gets its own counter space.
enum class StreamPurpose : std::uint32_t {
    kBrownian = 0,
    kInitialLaw = 1,
    kSlicing = 2,
    kSampling = 3,
};

/// Standard normal variates addressed by (purpose, stream, index). Two
/// normals come out of each Philox block via Box-Muller.
class NormalStream {
public:
    NormalStream(std::uint64_t seed, StreamPurpose purpose, std::uint32_t stream)
        : gen_(seed), purpose_(static_cast<std::uint32_t>(purpose)), stream_(stream) {}

    double at(std::uint64_t index) const;

    /// Uniform on the open interval (0, 1) at the given index.
    double uniform_at(std::uint64_t index) const;

private:
    Philox4x32 gen_;
    std::uint32_t purpose_;
    std::uint32_t stream_;
};

}  // namespace mvsim
