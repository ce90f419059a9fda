#include "mvsim/rng.hpp"

#include <cmath>
#include <numbers>

namespace mvsim {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

// 53-bit uniform in (0, 1); never returns 0 so log() below is safe.
inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
    return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace

Philox4x32::Counter Philox4x32::operator()(Counter ctr) const {
    Key key = key_;
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kMul0, ctr[0], hi0, lo0);
        mulhilo(kMul1, ctr[2], hi1, lo1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kWeyl0;
        key[1] += kWeyl1;
    }
    return ctr;
}

double NormalStream::at(std::uint64_t index) const {
    const std::uint64_t block = index >> 1;
    const auto out = gen_({static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
                           stream_, purpose_});
    const double u1 = to_open_unit(out[0], out[1]);
    const double u2 = to_open_unit(out[2], out[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return (index & 1u) ? radius * std::sin(angle) : radius * std::cos(angle);
}

double NormalStream::uniform_at(std::uint64_t index) const {
    // Uniforms live in the upper half of the counter space, away from normals.
    const std::uint64_t block = index | (std::uint64_t{1} << 63);
    const auto out = gen_({static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
                           stream_, purpose_});
    return to_open_unit(out[0], out[1]);
}

}  // namespace mvsim
