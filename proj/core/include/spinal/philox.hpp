#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace spinal {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
/// Pure function of (counter, key); gives reproducible, random-access
/// streams independent of platform.
inline std::array<uint32_t, 4> philox4x32(std::array<uint32_t, 4> ctr,
                                          std::array<uint32_t, 2> key) {
    constexpr uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
    constexpr uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const uint64_t p0 = uint64_t(M0) * ctr[0];
        const uint64_t p1 = uint64_t(M1) * ctr[2];
        ctr = {uint32_t(p1 >> 32) ^ ctr[1] ^ key[0], uint32_t(p1),
               uint32_t(p0 >> 32) ^ ctr[3] ^ key[1], uint32_t(p0)};
        key[0] += W0;
        key[1] += W1;
    }
    return ctr;
}

/// Standard-normal stream: Philox counter (pair_index, stream_id) keyed by a
/// 64-bit seed, Box-Muller on 53-bit uniforms. Samples are generated in
/// pairs; `at(j)` is random-access and `next()` walks the stream.
class GaussianStream {
public:
    GaussianStream(uint64_t seed, uint32_t stream_id)
        : key_{uint32_t(seed), uint32_t(seed >> 32)}, stream_(stream_id) {}

    std::array<double, 2> pair(uint64_t pair_index) const {
        const auto words = philox4x32(
            {uint32_t(pair_index), uint32_t(pair_index >> 32), stream_, 0u}, key_);
        const double u1 = unit_open(words[0], words[1]);
        const double u2 = unit_half_open(words[2], words[3]);
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 6.283185307179586476925287 * u2;
        return {radius * std::cos(angle), radius * std::sin(angle)};
    }

    double at(uint64_t j) const { return pair(j >> 1)[j & 1]; }

    double next() { return at(cursor_++); }

private:
    // 53-bit uniform in (0,1): log stays finite.
    static double unit_open(uint32_t a, uint32_t b) {
        const uint64_t m = ((uint64_t(a) << 32) | b) >> 11;
        return (double(m) + 0.5) * 0x1.0p-53;
    }
    // 53-bit uniform in [0,1).
    static double unit_half_open(uint32_t a, uint32_t b) {
        const uint64_t m = ((uint64_t(a) << 32) | b) >> 11;
        return double(m) * 0x1.0p-53;
    }

    std::array<uint32_t, 2> key_;
    uint32_t stream_;
    uint64_t cursor_ = 0;
};

}  // namespace spinal
