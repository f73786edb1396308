#include "spinal/protocol.hpp"

#include <cmath>
#include <stdexcept>

#include "spinal/channel.hpp"
#include "spinal/errors.hpp"
#include "spinal/hash.hpp"

namespace spinal {

namespace {

// Message type ids shared with the wire format.
constexpr uint8_t kHello = 0x01, kDelta = 0x02, kCrcTag = 0x03;
constexpr uint8_t kAckMsg = 0x04, kNackMsg = 0x05;

void log_delta(SessionTranscript& t, const PassDelta& d) {
    t.log.push_back({kDelta, 8 + 8ull * d.samples.size()});
    t.classical_bits_disclosed += 64ull * d.samples.size();
    t.passes_sent += 1;
}

}  // namespace

double capacity(double snr) {
    if (snr < 0.0)
        throw std::invalid_argument("capacity: snr must be >= 0");
    return 0.5 * std::log2(1.0 + snr);
}

double code_rate(uint32_t n, uint32_t k, uint32_t L, uint32_t v, uint32_t omega,
                 uint32_t lambda, double r) {
    const double vw = double(v) + double(omega);
    return k * (n - (n * std::pow(2.0, -vw) + lambda) - vw / r) / (double(n) * L);
}

double leakage_bound(uint32_t n, uint32_t v, uint32_t omega, uint32_t lambda) {
    return double(lambda) + n * std::pow(2.0, -(double(v) + double(omega)));
}

double pa_compression_rate(uint32_t n, uint32_t v, uint32_t omega, uint32_t lambda) {
    return 1.0 - (double(lambda) / n + std::pow(2.0, -(double(v) + double(omega))));
}

uint32_t crc_tag(const BitVec& message) {
    return crc32(message.bytes());
}

ProtocolParams derive_params(double snr, double v_a, const CodecConfig& cfg,
                             uint32_t lambda, uint32_t i_max) {
    if (!(snr > 0.0))
        throw std::invalid_argument("derive_params: snr must be positive");
    if (!(v_a > 0.0))
        throw std::invalid_argument("derive_params: v_a must be positive");
    cfg.validate();

    const double n = cfg.n, k = cfg.k, c = cfg.c, v = cfg.v, w = cfg.w;
    const double lam = lambda;

    // r appears inside eta, eta fixes l_min, l_min fixes omega, omega fixes
    // r. Iterate from r0 = 1 - lambda/n; the 2^-(v+omega) correction is tiny
    // so this settles almost immediately.
    double r = 1.0 - lam / n;
    double eta = 0.0, s_virt = 0.0;
    uint32_t l_min = 0, omega = 0;
    bool converged = false;
    for (int step = 0; step < 100; ++step) {
        eta = (v * r * n * std::log2(1.0 + snr) + 2.0 * k * c * w) /
              (v * r * (n - v / r - lam));
        s_virt = std::exp2(eta) - 1.0;
        l_min = uint32_t(std::ceil(k / (0.5 * std::log2(1.0 + s_virt))));
        omega = uint32_t((uint64_t(cfg.w) * l_min * cfg.c + cfg.v - 1) / cfg.v);
        const double r_next = 1.0 - (lam / n + std::pow(2.0, -(v + double(omega))));
        const bool settled = std::fabs(r_next - r) < 1e-12;
        r = r_next;
        if (settled) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw std::runtime_error("derive_params: fixed point failed to converge");

    eta = (v * r * n * std::log2(1.0 + snr) + 2.0 * k * c * w) /
          (v * r * (n - v / r - lam));
    s_virt = std::exp2(eta) - 1.0;
    l_min = uint32_t(std::ceil(k / (0.5 * std::log2(1.0 + s_virt))));
    omega = uint32_t((uint64_t(cfg.w) * l_min * cfg.c + cfg.v - 1) / cfg.v);

    ProtocolParams p;
    p.snr = snr;
    p.v_a = v_a;
    p.v_z = v_a / snr;
    p.eta = eta;
    p.s_nr_virtual = s_virt;
    p.p_star = s_virt * v_a / snr;
    p.r = r;
    p.l_min = l_min;
    p.lambda = lambda;
    p.v = cfg.v;
    p.w = cfg.w;
    p.omega = omega;
    p.i_max = i_max;
    return p;
}

CodecConfig session_codec(const CodecConfig& base, const ProtocolParams& params,
                          uint32_t s0, uint32_t t_seed) {
    CodecConfig codec = base;
    codec.p_star = params.p_star;
    codec.s0 = s0;
    codec.t_seed = t_seed;
    codec.validate();
    return codec;
}

// ---------------------------------------------------------------------------
// Bob

BobSession::BobSession(const ProtocolParams& params, const CodecConfig& codec,
                       std::vector<double> raw_y, uint64_t key_seed)
    : params_(params), codec_(codec), raw_(std::move(raw_y)),
      message_(random_bits(codec.n, key_seed)) {
    codec_.validate();
}

std::vector<PassDelta> BobSession::deltas_for(uint32_t first_pass, uint32_t last_pass) {
    const uint32_t spine = codec_.spine_count();
    const std::vector<PassBlock> passes =
        encode_passes(message_, first_pass, last_pass, codec_);
    std::vector<PassDelta> out;
    out.reserve(passes.size());
    for (const PassBlock& p : passes) {
        PassDelta d;
        d.pass_index = p.pass_index;
        d.samples = compute_differences(
            std::span(raw_).subspan(raw_cursor_, spine), p.symbols);
        raw_cursor_ += spine;
        out.push_back(std::move(d));
    }
    return out;
}

BobSession::Opening BobSession::start() {
    if (started_)
        throw std::logic_error("BobSession::start called twice");
    started_ = true;
    const uint32_t spine = codec_.spine_count();
    const uint32_t l_min = params_.l_min;
    if (raw_.size() < size_t(spine) * l_min)
        throw resource_exhausted("BobSession: raw data shorter than l_min passes");

    // Step 2 pairing: the initial block of l_min passes consumes raw samples
    // spine-major (all passes of spine 1, then spine 2, ...).
    const std::vector<PassBlock> passes = encode_passes(message_, 1, l_min, codec_);
    std::vector<double> flat(size_t(spine) * l_min);
    for (uint32_t i = 0; i < spine; ++i)
        for (uint32_t ell = 1; ell <= l_min; ++ell)
            flat[size_t(i) * l_min + (ell - 1)] = passes[ell - 1].symbols[i];
    const std::vector<double> delta_flat =
        compute_differences(std::span(raw_).first(flat.size()), flat);
    raw_cursor_ = flat.size();

    Opening opening;
    opening.deltas.resize(l_min);
    for (uint32_t ell = 1; ell <= l_min; ++ell) {
        PassDelta& d = opening.deltas[ell - 1];
        d.pass_index = ell;
        d.samples.resize(spine);
        for (uint32_t i = 0; i < spine; ++i)
            d.samples[i] = delta_flat[size_t(i) * l_min + (ell - 1)];
    }
    opening.crc = crc_tag(message_);

    transcript_.log.push_back({kHello, 80});
    for (const PassDelta& d : opening.deltas) log_delta(transcript_, d);
    transcript_.log.push_back({kCrcTag, 4});
    transcript_.classical_bits_disclosed += params_.lambda;
    return opening;
}

std::vector<PassDelta> BobSession::more(uint32_t n_passes) {
    if (!started_ || finished_)
        throw std::logic_error("BobSession::more on inactive session");
    const uint32_t spine = codec_.spine_count();
    if (raw_.size() - raw_cursor_ < size_t(spine) * n_passes)
        throw resource_exhausted("BobSession: raw data exhausted");
    const uint32_t first = transcript_.passes_sent + 1;
    std::vector<PassDelta> deltas = deltas_for(first, first + n_passes - 1);
    for (const PassDelta& d : deltas) log_delta(transcript_, d);
    return deltas;
}

// Bob mirrors Alice's attempt count from her replies: every NACK and the
// terminal ACK/FAIL each stand for one completed decode attempt.
void BobSession::on_ack() {
    transcript_.log.push_back({kAckMsg, 0});
    transcript_.decode_attempts += 1;
    finished_ = true;
    success_ = true;
}

void BobSession::on_nack() {
    transcript_.log.push_back({kNackMsg, 0});
    transcript_.decode_attempts += 1;
}

void BobSession::on_fail() {
    transcript_.decode_attempts += 1;
    finished_ = true;
    success_ = false;
}

void BobSession::on_abort() {
    finished_ = true;
    success_ = false;
    aborted_ = true;
}

// ---------------------------------------------------------------------------
// Alice

AliceSession::AliceSession(const ProtocolParams& params, const CodecConfig& codec,
                           std::vector<double> raw_x)
    : params_(params), codec_(codec), raw_(std::move(raw_x)) {
    codec_.validate();
}

void AliceSession::check_hello(const ProtocolParams& peer) const {
    const bool ints_match = peer.l_min == params_.l_min &&
                            peer.lambda == params_.lambda && peer.v == params_.v &&
                            peer.w == params_.w && peer.omega == params_.omega &&
                            peer.i_max == params_.i_max;
    auto close = [](double a, double b) {
        return std::fabs(a - b) <= 1e-12 * std::max(1.0, std::max(std::fabs(a), std::fabs(b)));
    };
    const bool reals_match = close(peer.snr, params_.snr) && close(peer.v_a, params_.v_a) &&
                             close(peer.v_z, params_.v_z) && close(peer.p_star, params_.p_star) &&
                             close(peer.eta, params_.eta) && close(peer.r, params_.r) &&
                             close(peer.s_nr_virtual, params_.s_nr_virtual);
    if (!ints_match || !reals_match)
        throw protocol_error("HELLO parameters disagree with local derivation");
}

void AliceSession::set_expected_tag(uint32_t tag) {
    if (expected_tag_.has_value())
        throw protocol_error("duplicate CRC tag");
    expected_tag_ = tag;
    transcript_.log.push_back({kCrcTag, 4});
    transcript_.classical_bits_disclosed += params_.lambda;
}

Verdict AliceSession::attempt(std::span<const PassDelta> new_deltas) {
    if (finished_)
        throw std::logic_error("AliceSession::attempt on finished session");
    if (!expected_tag_.has_value())
        throw protocol_error("attempt before CRC tag");

    const uint32_t spine = codec_.spine_count();
    const uint32_t l_min = params_.l_min;
    for (const PassDelta& d : new_deltas) {
        const uint32_t expected = uint32_t(side_info_.size()) + 1;
        if (d.pass_index != expected)
            throw protocol_error("delta pass out of order");
        if (d.samples.size() != spine)
            throw protocol_error("delta sample count != n/k");

        // Locate this pass's raw samples: the initial l_min passes tile the
        // raw block spine-major, later passes are contiguous chunks.
        PassBlock side;
        side.pass_index = d.pass_index;
        side.symbols.resize(spine);
        if (d.pass_index <= l_min) {
            if (raw_.size() < size_t(spine) * l_min)
                throw resource_exhausted("AliceSession: raw data shorter than l_min passes");
            for (uint32_t i = 0; i < spine; ++i)
                side.symbols[i] =
                    raw_[size_t(i) * l_min + (d.pass_index - 1)] - d.samples[i];
        } else {
            const size_t base = size_t(spine) * l_min +
                                size_t(spine) * (d.pass_index - l_min - 1);
            if (raw_.size() < base + spine)
                throw resource_exhausted("AliceSession: raw data exhausted");
            for (uint32_t i = 0; i < spine; ++i)
                side.symbols[i] = raw_[base + i] - d.samples[i];
        }
        side_info_.push_back(std::move(side));
        transcript_.log.push_back({kDelta, 8 + 8ull * spine});
        transcript_.classical_bits_disclosed += 64ull * spine;
        transcript_.passes_sent += 1;
    }
    if (side_info_.size() < l_min)
        throw protocol_error("attempt before l_min passes arrived");

    transcript_.decode_attempts += 1;
    last_decode_ = bubble_decode(side_info_, codec_);
    if (crc_tag(last_decode_.message) == *expected_tag_) {
        corrected_ = last_decode_.message;
        finished_ = true;
        success_ = true;
        transcript_.log.push_back({kAckMsg, 0});
        return Verdict::kAck;
    }
    if (transcript_.decode_attempts >= params_.i_max) {
        finished_ = true;
        success_ = false;
        return Verdict::kFail;
    }
    transcript_.log.push_back({kNackMsg, 0});
    return Verdict::kNack;
}

void AliceSession::on_abort() {
    finished_ = true;
    success_ = false;
    aborted_ = true;
}

// ---------------------------------------------------------------------------

namespace {

OutcomeRecord make_record(const ProtocolParams& p, const CodecConfig& codec,
                          bool success, bool aborted, uint32_t passes,
                          uint32_t iterations, double snr_for_beta) {
    OutcomeRecord rec;
    rec.success = success;
    rec.aborted = aborted;
    rec.passes_used = passes;
    rec.iterations = iterations;
    rec.leaked_bits = leakage_bound(codec.n, p.v, p.omega, p.lambda);
    if (passes > 0)
        rec.code_rate = code_rate(codec.n, codec.k, passes, p.v, p.omega, p.lambda, p.r);
    const double snr = (snr_for_beta > 0.0) ? snr_for_beta : p.snr;
    if (success)
        rec.beta_eff = rec.code_rate / capacity(snr);
    return rec;
}

}  // namespace

OutcomeRecord finalize(const BobSession& s, double snr_for_beta) {
    if (!s.finished())
        throw std::logic_error("finalize: Bob session still live");
    return make_record(s.params(), s.codec(), s.succeeded(), s.aborted(),
                       s.passes_sent(), s.attempts(), snr_for_beta);
}

OutcomeRecord finalize(const AliceSession& s, double snr_for_beta) {
    if (!s.finished())
        throw std::logic_error("finalize: Alice session still live");
    return make_record(s.params(), s.codec(), s.succeeded(), s.aborted(),
                       s.passes_received(), s.attempts(), snr_for_beta);
}

}  // namespace spinal
