#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace spinal {

/// Fixed-length bit string, packed MSB-first into bytes. Bit 0 is the most
/// significant bit of byte 0; unused padding bits in the last byte are kept
/// zero so byte-wise comparison equals bit-wise lexicographic comparison.
class BitVec {
public:
    BitVec() = default;
    explicit BitVec(uint32_t nbits) : nbits_(nbits), bytes_((nbits + 7) / 8, 0) {}

    uint32_t size() const { return nbits_; }
    const std::vector<uint8_t>& bytes() const { return bytes_; }

    bool get(uint32_t i) const {
        return (bytes_[i >> 3] >> (7 - (i & 7))) & 1u;
    }

    void set(uint32_t i, bool v) {
        uint8_t mask = uint8_t(1u << (7 - (i & 7)));
        if (v)
            bytes_[i >> 3] |= mask;
        else
            bytes_[i >> 3] &= uint8_t(~mask);
    }

    /// k-bit block `index` (blocks tile the string MSB-first), as an integer.
    uint32_t block(uint32_t index, uint32_t k) const {
        uint32_t val = 0;
        uint32_t base = index * k;
        for (uint32_t j = 0; j < k; ++j)
            val = (val << 1) | uint32_t(get(base + j));
        return val;
    }

    void set_block(uint32_t index, uint32_t k, uint32_t val) {
        uint32_t base = index * k;
        for (uint32_t j = 0; j < k; ++j)
            set(base + j, (val >> (k - 1 - j)) & 1u);
    }

    bool operator==(const BitVec&) const = default;

    /// Bit-wise lexicographic order (equal lengths assumed).
    bool operator<(const BitVec& other) const { return bytes_ < other.bytes_; }

private:
    uint32_t nbits_ = 0;
    std::vector<uint8_t> bytes_;
};

/// splitmix64: seed expansion for deriving independent sub-seeds.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// n uniformly random bits from a 64-bit seed (splitmix64 word stream).
inline BitVec random_bits(uint32_t nbits, uint64_t seed) {
    BitVec out(nbits);
    uint64_t word = 0;
    uint32_t have = 0;
    uint64_t ctr = 0;
    for (uint32_t i = 0; i < nbits; ++i) {
        if (have == 0) {
            word = splitmix64(seed + ctr++);
            have = 64;
        }
        out.set(i, (word >> --have) & 1u);
    }
    return out;
}

}  // namespace spinal
