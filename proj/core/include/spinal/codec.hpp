#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "spinal/bits.hpp"

namespace spinal {

/// All spinal-code constants for one session. Immutable once validated;
/// every codec operation is a pure function of (arguments, config).
struct CodecConfig {
    uint32_t n = 1024;        ///< message length in bits, multiple of k
    uint32_t k = 4;           ///< message bits absorbed per spine state (1..8)
    uint32_t c = 6;           ///< bits per constellation symbol (1..32)
    uint32_t v = 32;          ///< spine state width in bits (32 supported)
    uint32_t beam_width = 256;  ///< B, surviving nodes per tree level
    double beta_trunc = 3.0;  ///< constellation truncation width (in sigmas)
    double p_star = 1.0;      ///< modulation variance of mapped symbols
    uint32_t s0 = 0;          ///< initial spine state (pre-shared)
    uint32_t w = 32;          ///< RNG pass-index input width in bits (32 supported)
    uint32_t t_seed = 0;      ///< pre-shared RNG seed, folded into the pass index

    uint32_t spine_count() const { return n / k; }

    /// Throws std::invalid_argument when any invariant fails.
    void validate() const;
};

/// The n/k hash states derived from a message (states[i] after absorbing
/// message blocks 0..i).
struct SpineChain {
    std::vector<uint32_t> states;
};

/// One pass: n/k real-valued symbols, one per spine state.
struct PassBlock {
    uint32_t pass_index = 0;  ///< 1-based
    std::vector<double> symbols;
};

struct DecodeResult {
    BitVec message;
    double cost = 0.0;             ///< sum of squared residuals of the winner
    uint32_t levels_expanded = 0;  ///< tree depth walked (= n/k)
    uint64_t nodes_visited = 0;    ///< children scored across all levels
};

/// Truncated-Gaussian constellation: the 2^c symbol values of map_symbol,
/// precomputed for the hot paths.
class SymbolMapper {
public:
    SymbolMapper(uint32_t c, double beta_trunc, double p_star);

    double map(uint32_t b) const { return table_[b]; }
    std::span<const double> table() const { return table_; }
    /// Open-interval bound: every symbol lies in (-bound, +bound).
    double bound() const { return bound_; }

private:
    std::vector<double> table_;
    double bound_;
};

/// One spine-hash step over [state as 4 big-endian bytes | block as 1 byte].
/// Throws std::invalid_argument when block >= 2^k.
uint32_t hash_state(uint32_t state, uint32_t block, uint32_t k);

/// Spine chain of message (length n). Prefix property: the chain of a
/// kd-bit prefix equals the first d states.
SpineChain compute_spine(const BitVec& message, const CodecConfig& cfg);

/// `count` bits of the RNG stream keyed by (spine, pass_index). Word t of
/// the stream hashes [spine:4B | t_seed + pass_index : 4B BE | t:4B BE];
/// bits are taken MSB-first. Random access per pass: no earlier pass needs
/// to be generated.
BitVec rng_bits(uint32_t spine, uint32_t pass_index, uint32_t count,
                const CodecConfig& cfg);

/// Constellation mapping of a c-bit value onto the truncated Gaussian.
double map_symbol(uint32_t b, const CodecConfig& cfg);

/// Passes first_pass..last_pass (1-based, inclusive) for a message.
std::vector<PassBlock> encode_passes(const BitVec& message, uint32_t first_pass,
                                     uint32_t last_pass, const CodecConfig& cfg);

/// Beam search over the 2^k-ary message-prefix tree: every level expands all
/// candidates, keeps the beam_width lowest-cost children (ties broken toward
/// the lexicographically smaller message prefix), and the cheapest leaf wins.
/// Bit-identical output for identical inputs.
DecodeResult bubble_decode(std::span<const PassBlock> received,
                           const CodecConfig& cfg);

}  // namespace spinal
