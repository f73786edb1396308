#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "spinal/bits.hpp"
#include "spinal/codec.hpp"

namespace spinal {

/// Session parameters derived from the channel SNR (fixed point of the
/// r / eta / l_min / omega system).
struct ProtocolParams {
    double snr = 0.0;     ///< SNR the derivation used
    double v_a = 0.0;     ///< modulation variance of the raw data
    double v_z = 0.0;     ///< physical noise variance, v_a / snr
    double p_star = 0.0;  ///< spinal-symbol modulation variance (at the bound)
    double eta = 0.0;
    double s_nr_virtual = 0.0;  ///< p_star / v_z = 2^eta - 1
    double r = 0.0;             ///< privacy-amplification compression rate
    uint32_t l_min = 0;         ///< minimum passes before the first attempt
    uint32_t lambda = 32;       ///< CRC width in bits
    uint32_t v = 32;            ///< spine state width
    uint32_t w = 32;            ///< RNG pass-index width
    uint32_t omega = 0;         ///< accounted RNG seed bits, ceil(w*l_min*c/v)
    uint32_t i_max = 50;        ///< decode-attempt cap
};

/// 0.5 * log2(1 + snr), the Gaussian channel capacity per symbol.
double capacity(double snr);

/// Rate of the reconciliation protocol after L passes, net of the leakage
/// and pre-shared-secret bookkeeping.
double code_rate(uint32_t n, uint32_t k, uint32_t L, uint32_t v, uint32_t omega,
                 uint32_t lambda, double r);

/// Upper bound, in bits, on what the classical transcript reveals about the
/// corrected key: n / 2^(v+omega) + lambda.
double leakage_bound(uint32_t n, uint32_t v, uint32_t omega, uint32_t lambda);

/// Privacy-amplification compression rate ~ 1 - (lambda/n + 2^-(v+omega)).
double pa_compression_rate(uint32_t n, uint32_t v, uint32_t omega, uint32_t lambda);

/// CRC-32 tag over the message packed MSB-first into bytes.
uint32_t crc_tag(const BitVec& message);

/// Solves the parameter fixed point at the given SNR. cfg supplies the code
/// geometry (n, k, c, v, w); p_star in cfg is ignored and replaced by the
/// derived value when sessions are built. Throws std::invalid_argument for
/// snr <= 0, std::runtime_error if the fixed point fails to settle.
ProtocolParams derive_params(double snr, double v_a, const CodecConfig& cfg,
                             uint32_t lambda = 32, uint32_t i_max = 50);

/// Codec configuration a session actually encodes/decodes with: cfg plus the
/// derived p_star and the pre-shared secrets.
CodecConfig session_codec(const CodecConfig& base, const ProtocolParams& params,
                          uint32_t s0, uint32_t t_seed);

/// One pass of differences on the wire.
struct PassDelta {
    uint32_t pass_index = 0;
    std::vector<double> samples;
};

enum class Verdict { kAck, kNack, kFail };

/// Ordered log of protocol traffic plus the disclosure ledger. Only delta
/// samples (64 bits each) and the lambda-bit tag count as disclosed.
struct SessionTranscript {
    struct Entry {
        uint8_t msg_type;
        uint64_t payload_bytes;
    };
    std::vector<Entry> log;
    uint32_t decode_attempts = 0;
    uint32_t passes_sent = 0;
    uint64_t classical_bits_disclosed = 0;
};

/// Per-block result.
struct OutcomeRecord {
    bool success = false;
    uint32_t passes_used = 0;  ///< L
    uint32_t iterations = 0;   ///< decode attempts
    double code_rate = 0.0;    ///< R at the actual L
    double beta_eff = 0.0;     ///< R / capacity, 0 when failed
    double leaked_bits = 0.0;
    double millis = 0.0;       ///< filled by the driver; excluded from determinism
    bool aborted = false;
};

/// Encoder side (reverse reconciliation: Bob's key is the target). Owns the
/// message M and a cursor into Bob's raw data. Single-owner state machine.
class BobSession {
public:
    BobSession(const ProtocolParams& params, const CodecConfig& codec,
               std::vector<double> raw_y, uint64_t key_seed);

    struct Opening {
        std::vector<PassDelta> deltas;  ///< passes 1..l_min
        uint32_t crc = 0;
    };

    /// Draws M, encodes the first l_min passes, pairs them against raw data
    /// (spine-major over the initial block). Throws resource_exhausted when
    /// raw data cannot cover l_min passes.
    Opening start();

    /// Encodes the next n_passes passes (one per NACK by default). Throws
    /// resource_exhausted when raw data runs out; the caller then aborts.
    std::vector<PassDelta> more(uint32_t n_passes = 1);

    void on_ack();
    void on_nack();
    void on_fail();
    void on_abort();

    bool finished() const { return finished_; }
    bool succeeded() const { return success_; }
    bool aborted() const { return aborted_; }
    uint32_t passes_sent() const { return transcript_.passes_sent; }
    uint32_t attempts() const { return transcript_.decode_attempts; }
    const BitVec& message() const { return message_; }
    const ProtocolParams& params() const { return params_; }
    const CodecConfig& codec() const { return codec_; }
    const SessionTranscript& transcript() const { return transcript_; }

private:
    std::vector<PassDelta> deltas_for(uint32_t first_pass, uint32_t last_pass);

    ProtocolParams params_;
    CodecConfig codec_;
    std::vector<double> raw_;
    size_t raw_cursor_ = 0;
    BitVec message_;
    SessionTranscript transcript_;
    bool started_ = false;
    bool finished_ = false;
    bool success_ = false;
    bool aborted_ = false;
};

/// Decoder side. Accumulates side information pass by pass and re-runs the
/// bubble decoder on every attempt until the CRC gate passes or the attempt
/// cap is reached. Never looks at M.
class AliceSession {
public:
    AliceSession(const ProtocolParams& params, const CodecConfig& codec,
                 std::vector<double> raw_x);

    /// Consistency check of the peer's HELLO against local parameters.
    void check_hello(const ProtocolParams& peer) const;

    void set_expected_tag(uint32_t tag);

    /// Appends side info for the new deltas (c' = x - delta), runs the
    /// decoder over every pass so far, gates on CRC. Misaligned deltas raise
    /// protocol_error.
    Verdict attempt(std::span<const PassDelta> new_deltas);

    void on_abort();

    bool finished() const { return finished_; }
    bool succeeded() const { return success_; }
    bool aborted() const { return aborted_; }
    uint32_t passes_received() const { return transcript_.passes_sent; }
    uint32_t attempts() const { return transcript_.decode_attempts; }
    /// Valid after a successful attempt.
    const BitVec& corrected_key() const { return corrected_; }
    /// Decoder diagnostics of the last attempt.
    const DecodeResult& last_decode() const { return last_decode_; }
    const ProtocolParams& params() const { return params_; }
    const CodecConfig& codec() const { return codec_; }
    const SessionTranscript& transcript() const { return transcript_; }

private:
    ProtocolParams params_;
    CodecConfig codec_;
    std::vector<double> raw_;
    std::vector<PassBlock> side_info_;
    std::optional<uint32_t> expected_tag_;
    BitVec corrected_;
    DecodeResult last_decode_;
    SessionTranscript transcript_;
    bool finished_ = false;
    bool success_ = false;
    bool aborted_ = false;
};

/// Outcome of a terminated session; beta against capacity(snr_for_beta)
/// (defaults to the SNR the parameters were derived at).
OutcomeRecord finalize(const BobSession& session, double snr_for_beta = 0.0);
OutcomeRecord finalize(const AliceSession& session, double snr_for_beta = 0.0);

}  // namespace spinal
