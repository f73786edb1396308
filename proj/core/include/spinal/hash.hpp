#pragma once

#include <cstdint>
#include <span>

namespace spinal {

// Jenkins one-at-a-time, exposed as composable steps so fixed-layout inputs
// (spine hashing, RNG word generation) can share partially absorbed state.

inline uint32_t oaat_step(uint32_t h, uint8_t byte) {
    h += byte;
    h += h << 10;
    h ^= h >> 6;
    return h;
}

inline uint32_t oaat_final(uint32_t h) {
    h += h << 3;
    h ^= h >> 11;
    h += h << 15;
    return h;
}

/// Absorb a 32-bit word as 4 big-endian bytes.
inline uint32_t oaat_word(uint32_t h, uint32_t w) {
    h = oaat_step(h, uint8_t(w >> 24));
    h = oaat_step(h, uint8_t(w >> 16));
    h = oaat_step(h, uint8_t(w >> 8));
    h = oaat_step(h, uint8_t(w));
    return h;
}

inline uint32_t oaat(std::span<const uint8_t> data) {
    uint32_t h = 0;
    for (uint8_t b : data) h = oaat_step(h, b);
    return oaat_final(h);
}

/// CRC-32 (polynomial 0x04C11DB7, reflected, init/xorout 0xFFFFFFFF).
uint32_t crc32(std::span<const uint8_t> data);

}  // namespace spinal
