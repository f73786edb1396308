#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdint>
#include <vector>

#include "spinal/bits.hpp"
#include "spinal/codec.hpp"
#include "spinal/hash.hpp"
#include "spinal/protocol.hpp"

namespace {

// Independent byte-level reference: one-at-a-time written from the published
// description, no shared code with the library implementation.
uint32_t oaat_reference(const std::vector<uint8_t>& data) {
    uint32_t hash = 0;
    for (size_t i = 0; i < data.size(); ++i) {
        hash = (hash + data[i]) & 0xFFFFFFFFu;
        hash = (hash + (hash << 10)) & 0xFFFFFFFFu;
        hash = hash ^ (hash >> 6);
    }
    hash = (hash + (hash << 3)) & 0xFFFFFFFFu;
    hash = hash ^ (hash >> 11);
    hash = (hash + (hash << 15)) & 0xFFFFFFFFu;
    return hash;
}

// Bitwise CRC-32 reference (0x04C11DB7 reflected = 0xEDB88320), independent
// of the table-driven implementation.
uint32_t crc32_reference(const std::vector<uint8_t>& data) {
    uint32_t crc = 0xFFFFFFFFu;
    for (uint8_t byte : data) {
        crc ^= byte;
        for (int bit = 0; bit < 8; ++bit)
            crc = (crc & 1u) ? (crc >> 1) ^ 0xEDB88320u : crc >> 1;
    }
    return crc ^ 0xFFFFFFFFu;
}

std::vector<uint8_t> state_block_bytes(uint32_t state, uint8_t block) {
    return {uint8_t(state >> 24), uint8_t(state >> 16), uint8_t(state >> 8),
            uint8_t(state), block};
}

}  // namespace

TEST_CASE("one-at-a-time matches the published test vector") {
    const std::vector<uint8_t> a = {'a'};
    CHECK(spinal::oaat(a) == 0xCA2E9442u);
    CHECK(oaat_reference(a) == 0xCA2E9442u);
}

TEST_CASE("hash_state equals the byte-level reference oracle") {
    // Frozen from the reference over bytes [00 00 00 00 00].
    CHECK(spinal::hash_state(0x00000000u, 0b0000u, 4) == 0x00000000u);
    CHECK(oaat_reference({0, 0, 0, 0, 0}) == 0x00000000u);

    CHECK(spinal::hash_state(0x00000000u, 1u, 4) == 0x124EA49Du);
    CHECK(spinal::hash_state(0xDEADBEEFu, 5u, 4) == 0xE306DB1Cu);

    for (uint32_t state : {0u, 1u, 0x12345678u, 0xFFFFFFFFu, 0xA5A5A5A5u})
        for (uint32_t block = 0; block < 16; ++block)
            CHECK(spinal::hash_state(state, block, 4) ==
                  oaat_reference(state_block_bytes(state, uint8_t(block))));
}

TEST_CASE("hash_state is deterministic and validates its block") {
    CHECK(spinal::hash_state(0xCAFEBABEu, 9, 4) == spinal::hash_state(0xCAFEBABEu, 9, 4));
    CHECK_THROWS_AS(spinal::hash_state(0, 16, 4), std::invalid_argument);
    CHECK_THROWS_AS(spinal::hash_state(0, 2, 1), std::invalid_argument);
    CHECK_THROWS_AS(spinal::hash_state(0, 0, 9), std::invalid_argument);
}

TEST_CASE("distinct blocks almost always give distinct outputs") {
    // Monte-Carlo collision check over 10^4 random states.
    uint64_t distinct = 0;
    const uint64_t trials = 10000;
    uint64_t rng = 42;
    for (uint64_t t = 0; t < trials; ++t) {
        const uint32_t state = uint32_t(spinal::splitmix64(rng++));
        const uint32_t m1 = state & 0xF;
        const uint32_t m2 = (m1 + 1 + (state >> 4) % 15) & 0xF;
        if (spinal::hash_state(state, m1, 4) != spinal::hash_state(state, m2, 4))
            distinct += 1;
    }
    CHECK(double(distinct) / double(trials) >= 0.999);
}

TEST_CASE("crc_tag matches the standard CRC-32 check value") {
    const std::vector<uint8_t> check = {'1', '2', '3', '4', '5', '6', '7', '8', '9'};
    CHECK(spinal::crc32(check) == 0xCBF43926u);
    CHECK(crc32_reference(check) == 0xCBF43926u);

    spinal::BitVec msg(72);
    for (uint32_t i = 0; i < 9; ++i)
        msg.set_block(i, 8, uint32_t('1' + i));
    CHECK(spinal::crc_tag(msg) == 0xCBF43926u);
}

TEST_CASE("crc32 equals the bitwise reference on random inputs") {
    uint64_t rng = 7;
    for (int len : {0, 1, 2, 3, 8, 64, 129}) {
        std::vector<uint8_t> data(static_cast<size_t>(len));
        for (auto& b : data) b = uint8_t(spinal::splitmix64(rng++));
        CHECK(spinal::crc32(data) == crc32_reference(data));
    }
}

TEST_CASE("single-bit flips always move the tag (64-bit message)") {
    const spinal::BitVec msg = spinal::random_bits(64, 1234);
    const uint32_t tag = spinal::crc_tag(msg);
    for (uint32_t i = 0; i < 64; ++i) {
        spinal::BitVec flipped = msg;
        flipped.set(i, !flipped.get(i));
        CHECK(spinal::crc_tag(flipped) != tag);
    }
}
