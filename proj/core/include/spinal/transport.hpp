#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "spinal/protocol.hpp"

namespace spinal {

enum class MsgType : uint8_t {
    kHello = 0x01,
    kDelta = 0x02,
    kCrcTag = 0x03,
    kAck = 0x04,
    kNack = 0x05,
    kAbort = 0x06,
};

/// Wire frame: [type:1B | payload length:u32 BE | payload].
struct Frame {
    MsgType type = MsgType::kAbort;
    std::vector<uint8_t> payload;
    bool operator==(const Frame&) const = default;
};

std::vector<uint8_t> encode_frame(const Frame& frame);

/// Incremental frame parser; feed() arbitrary chunks, poll next().
/// Unknown message types raise protocol_error.
class FrameParser {
public:
    void feed(std::span<const uint8_t> bytes);
    std::optional<Frame> next();
    /// True when fed bytes end in the middle of a frame.
    bool mid_frame() const { return !buffer_.empty(); }

private:
    std::vector<uint8_t> buffer_;
};

// Payload codecs. Multi-byte payload fields are little-endian.
std::vector<uint8_t> pack_hello(const ProtocolParams& params);
ProtocolParams unpack_hello(std::span<const uint8_t> payload);
std::vector<uint8_t> pack_delta(const PassDelta& delta);
PassDelta unpack_delta(std::span<const uint8_t> payload);
std::vector<uint8_t> pack_crc(uint32_t tag);
uint32_t unpack_crc(std::span<const uint8_t> payload);

/// Reliable in-order byte stream; both loopback pipes and TCP sockets
/// implement it. One reader plus one writer per endpoint.
class ByteStream {
public:
    virtual ~ByteStream() = default;
    /// Blocks for at least one byte; 0 means end of stream.
    virtual size_t read_some(uint8_t* out, size_t max) = 0;
    virtual void write(std::span<const uint8_t> bytes) = 0;
    /// Signals end of stream to the peer.
    virtual void shutdown() = 0;
};

/// In-process pipe pair with stream semantics identical to a socket.
std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>> make_loopback();

class TcpListener {
public:
    TcpListener(const std::string& host, uint16_t port);  // port 0 = ephemeral
    ~TcpListener();
    uint16_t port() const { return port_; }
    std::unique_ptr<ByteStream> accept_one();

private:
    int fd_ = -1;
    uint16_t port_ = 0;
};

std::unique_ptr<ByteStream> tcp_connect(const std::string& host, uint16_t port);

/// Blocking frame read; nullopt on clean end of stream, protocol_error on a
/// stream that ends mid-frame or carries an unknown type.
std::optional<Frame> read_frame(ByteStream& stream, FrameParser& parser);

enum class Role { kBob, kAlice };

/// Drives one reconciliation session over a byte stream until ACK, FAIL or
/// ABORT. raw is Bob's y for Role::kBob, Alice's x for Role::kAlice;
/// key_seed is only used by Bob. The outcome is a pure function of
/// (params, codec, raw, key_seed) — the transport never changes it.
OutcomeRecord run_session(Role role, ByteStream& stream,
                          const ProtocolParams& params, const CodecConfig& codec,
                          std::vector<double> raw, uint64_t key_seed = 0,
                          double snr_for_beta = 0.0);

}  // namespace spinal
