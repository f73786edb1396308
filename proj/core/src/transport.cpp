#include "spinal/transport.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>

#include "spinal/errors.hpp"

namespace spinal {

namespace {

constexpr size_t kMaxPayload = 1u << 30;

void put_u32be(std::vector<uint8_t>& out, uint32_t x) {
    out.push_back(uint8_t(x >> 24));
    out.push_back(uint8_t(x >> 16));
    out.push_back(uint8_t(x >> 8));
    out.push_back(uint8_t(x));
}

void put_u32le(std::vector<uint8_t>& out, uint32_t x) {
    out.push_back(uint8_t(x));
    out.push_back(uint8_t(x >> 8));
    out.push_back(uint8_t(x >> 16));
    out.push_back(uint8_t(x >> 24));
}

void put_f64le(std::vector<uint8_t>& out, double x) {
    uint64_t bits;
    std::memcpy(&bits, &x, 8);
    for (int i = 0; i < 8; ++i) out.push_back(uint8_t(bits >> (8 * i)));
}

uint32_t get_u32le(std::span<const uint8_t> in, size_t at) {
    return uint32_t(in[at]) | uint32_t(in[at + 1]) << 8 | uint32_t(in[at + 2]) << 16 |
           uint32_t(in[at + 3]) << 24;
}

double get_f64le(std::span<const uint8_t> in, size_t at) {
    uint64_t bits = 0;
    for (int i = 7; i >= 0; --i) bits = (bits << 8) | in[at + i];
    double x;
    std::memcpy(&x, &bits, 8);
    return x;
}

bool valid_type(uint8_t t) { return t >= 0x01 && t <= 0x06; }

}  // namespace

std::vector<uint8_t> encode_frame(const Frame& frame) {
    if (frame.payload.size() >= kMaxPayload)
        throw std::invalid_argument("encode_frame: payload too large");
    std::vector<uint8_t> out;
    out.reserve(5 + frame.payload.size());
    out.push_back(uint8_t(frame.type));
    put_u32be(out, uint32_t(frame.payload.size()));
    out.insert(out.end(), frame.payload.begin(), frame.payload.end());
    return out;
}

void FrameParser::feed(std::span<const uint8_t> bytes) {
    buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<Frame> FrameParser::next() {
    if (buffer_.size() < 5)
        return std::nullopt;
    if (!valid_type(buffer_[0]))
        throw protocol_error("unknown frame type");
    const uint32_t len = uint32_t(buffer_[1]) << 24 | uint32_t(buffer_[2]) << 16 |
                         uint32_t(buffer_[3]) << 8 | uint32_t(buffer_[4]);
    if (len >= kMaxPayload)
        throw protocol_error("frame payload too large");
    if (buffer_.size() < 5ull + len)
        return std::nullopt;
    Frame frame;
    frame.type = MsgType(buffer_[0]);
    frame.payload.assign(buffer_.begin() + 5, buffer_.begin() + 5 + len);
    buffer_.erase(buffer_.begin(), buffer_.begin() + 5 + len);
    return frame;
}

// HELLO payload, 80 bytes: snr, v_a, v_z, p_star, eta, s_nr_virtual, r as
// f64, then l_min, lambda, v, w, omega, i_max as u32 (all little-endian).
std::vector<uint8_t> pack_hello(const ProtocolParams& p) {
    std::vector<uint8_t> out;
    out.reserve(80);
    put_f64le(out, p.snr);
    put_f64le(out, p.v_a);
    put_f64le(out, p.v_z);
    put_f64le(out, p.p_star);
    put_f64le(out, p.eta);
    put_f64le(out, p.s_nr_virtual);
    put_f64le(out, p.r);
    put_u32le(out, p.l_min);
    put_u32le(out, p.lambda);
    put_u32le(out, p.v);
    put_u32le(out, p.w);
    put_u32le(out, p.omega);
    put_u32le(out, p.i_max);
    return out;
}

ProtocolParams unpack_hello(std::span<const uint8_t> in) {
    if (in.size() != 80)
        throw protocol_error("HELLO payload must be 80 bytes");
    ProtocolParams p;
    p.snr = get_f64le(in, 0);
    p.v_a = get_f64le(in, 8);
    p.v_z = get_f64le(in, 16);
    p.p_star = get_f64le(in, 24);
    p.eta = get_f64le(in, 32);
    p.s_nr_virtual = get_f64le(in, 40);
    p.r = get_f64le(in, 48);
    p.l_min = get_u32le(in, 56);
    p.lambda = get_u32le(in, 60);
    p.v = get_u32le(in, 64);
    p.w = get_u32le(in, 68);
    p.omega = get_u32le(in, 72);
    p.i_max = get_u32le(in, 76);
    return p;
}

std::vector<uint8_t> pack_delta(const PassDelta& d) {
    std::vector<uint8_t> out;
    out.reserve(8 + 8 * d.samples.size());
    put_u32le(out, d.pass_index);
    put_u32le(out, uint32_t(d.samples.size()));
    for (double s : d.samples) put_f64le(out, s);
    return out;
}

PassDelta unpack_delta(std::span<const uint8_t> in) {
    if (in.size() < 8)
        throw protocol_error("DELTA payload too short");
    PassDelta d;
    d.pass_index = get_u32le(in, 0);
    const uint32_t count = get_u32le(in, 4);
    if (in.size() != 8ull + 8ull * count)
        throw protocol_error("DELTA payload length mismatch");
    d.samples.resize(count);
    for (uint32_t i = 0; i < count; ++i) d.samples[i] = get_f64le(in, 8 + 8ull * i);
    return d;
}

std::vector<uint8_t> pack_crc(uint32_t tag) {
    std::vector<uint8_t> out;
    put_u32le(out, tag);
    return out;
}

uint32_t unpack_crc(std::span<const uint8_t> in) {
    if (in.size() != 4)
        throw protocol_error("CRC_TAG payload must be 4 bytes");
    return get_u32le(in, 0);
}

// ---------------------------------------------------------------------------
// Loopback

namespace {

struct PipeBuffer {
    std::mutex m;
    std::condition_variable cv;
    std::deque<uint8_t> data;
    bool closed = false;
};

class LoopbackStream : public ByteStream {
public:
    LoopbackStream(std::shared_ptr<PipeBuffer> in, std::shared_ptr<PipeBuffer> out)
        : in_(std::move(in)), out_(std::move(out)) {}

    ~LoopbackStream() override { shutdown(); }

    size_t read_some(uint8_t* out, size_t max) override {
        std::unique_lock lock(in_->m);
        in_->cv.wait(lock, [&] { return !in_->data.empty() || in_->closed; });
        const size_t n = std::min(max, in_->data.size());
        for (size_t i = 0; i < n; ++i) {
            out[i] = in_->data.front();
            in_->data.pop_front();
        }
        return n;
    }

    void write(std::span<const uint8_t> bytes) override {
        std::lock_guard lock(out_->m);
        if (out_->closed)
            throw io_error("loopback: peer endpoint closed");
        out_->data.insert(out_->data.end(), bytes.begin(), bytes.end());
        out_->cv.notify_one();
    }

    void shutdown() override {
        {
            std::lock_guard lock(out_->m);
            out_->closed = true;
            out_->cv.notify_one();
        }
        {
            std::lock_guard lock(in_->m);
            in_->closed = true;
            in_->cv.notify_one();
        }
    }

private:
    std::shared_ptr<PipeBuffer> in_, out_;
};

}  // namespace

std::pair<std::unique_ptr<ByteStream>, std::unique_ptr<ByteStream>> make_loopback() {
    auto a2b = std::make_shared<PipeBuffer>();
    auto b2a = std::make_shared<PipeBuffer>();
    return {std::make_unique<LoopbackStream>(b2a, a2b),
            std::make_unique<LoopbackStream>(a2b, b2a)};
}

// ---------------------------------------------------------------------------
// TCP

namespace {

class TcpStream : public ByteStream {
public:
    explicit TcpStream(int fd) : fd_(fd) {}
    ~TcpStream() override {
        if (fd_ >= 0) ::close(fd_);
    }

    size_t read_some(uint8_t* out, size_t max) override {
        for (;;) {
            const ssize_t n = ::recv(fd_, out, max, 0);
            if (n >= 0) return size_t(n);
            if (errno == EINTR) continue;
            throw io_error(std::string("recv: ") + std::strerror(errno));
        }
    }

    void write(std::span<const uint8_t> bytes) override {
        size_t off = 0;
        while (off < bytes.size()) {
            const ssize_t n =
                ::send(fd_, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                throw io_error(std::string("send: ") + std::strerror(errno));
            }
            off += size_t(n);
        }
    }

    void shutdown() override { ::shutdown(fd_, SHUT_WR); }

private:
    int fd_;
};

sockaddr_in make_addr(const std::string& host, uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
        throw io_error("bad IPv4 address: " + host);
    return addr;
}

}  // namespace

TcpListener::TcpListener(const std::string& host, uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0)
        throw io_error(std::string("socket: ") + std::strerror(errno));
    const int one = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr = make_addr(host, port);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0)
        throw io_error(std::string("bind: ") + std::strerror(errno));
    if (::listen(fd_, 8) < 0)
        throw io_error(std::string("listen: ") + std::strerror(errno));
    socklen_t len = sizeof addr;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
    if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<ByteStream> TcpListener::accept_one() {
    for (;;) {
        const int fd = ::accept(fd_, nullptr, nullptr);
        if (fd >= 0) return std::make_unique<TcpStream>(fd);
        if (errno == EINTR) continue;
        throw io_error(std::string("accept: ") + std::strerror(errno));
    }
}

std::unique_ptr<ByteStream> tcp_connect(const std::string& host, uint16_t port) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0)
        throw io_error(std::string("socket: ") + std::strerror(errno));
    sockaddr_in addr = make_addr(host, port);
    if (::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
        const int err = errno;
        ::close(fd);
        throw io_error(std::string("connect: ") + std::strerror(err));
    }
    return std::make_unique<TcpStream>(fd);
}

// ---------------------------------------------------------------------------
// Session driver

std::optional<Frame> read_frame(ByteStream& stream, FrameParser& parser) {
    for (;;) {
        if (auto frame = parser.next())
            return frame;
        uint8_t buf[4096];
        const size_t n = stream.read_some(buf, sizeof buf);
        if (n == 0) {
            if (parser.mid_frame())
                throw protocol_error("stream ended mid-frame");
            return std::nullopt;
        }
        parser.feed({buf, n});
    }
}

namespace {

void send_frame(ByteStream& stream, MsgType type, std::vector<uint8_t> payload = {}) {
    stream.write(encode_frame({type, std::move(payload)}));
}

OutcomeRecord drive_bob(ByteStream& stream, const ProtocolParams& params,
                        const CodecConfig& codec, std::vector<double> raw,
                        uint64_t key_seed, double snr_for_beta) {
    BobSession bob(params, codec, std::move(raw), key_seed);
    FrameParser parser;
    try {
        BobSession::Opening opening = bob.start();
        send_frame(stream, MsgType::kHello, pack_hello(params));
        for (const PassDelta& d : opening.deltas)
            send_frame(stream, MsgType::kDelta, pack_delta(d));
        send_frame(stream, MsgType::kCrcTag, pack_crc(opening.crc));

        while (!bob.finished()) {
            const auto frame = read_frame(stream, parser);
            if (!frame) {
                bob.on_abort();
                break;
            }
            switch (frame->type) {
                case MsgType::kAck:
                    bob.on_ack();
                    break;
                case MsgType::kNack: {
                    bob.on_nack();
                    std::vector<PassDelta> deltas;
                    try {
                        deltas = bob.more(1);
                    } catch (const resource_exhausted&) {
                        send_frame(stream, MsgType::kAbort);
                        bob.on_abort();
                        break;
                    }
                    for (const PassDelta& d : deltas)
                        send_frame(stream, MsgType::kDelta, pack_delta(d));
                    break;
                }
                case MsgType::kAbort:
                    // The peer gives up either at the attempt cap or on error.
                    if (bob.attempts() + 1 == params.i_max)
                        bob.on_fail();
                    else
                        bob.on_abort();
                    break;
                default:
                    throw protocol_error("unexpected frame for Bob");
            }
        }
    } catch (const resource_exhausted&) {
        try {
            send_frame(stream, MsgType::kAbort);
        } catch (const io_error&) {}
        bob.on_abort();
    } catch (const protocol_error&) {
        try {
            send_frame(stream, MsgType::kAbort);
        } catch (const io_error&) {}
        bob.on_abort();
    } catch (const io_error&) {
        bob.on_abort();
    }
    stream.shutdown();
    return finalize(bob, snr_for_beta);
}

OutcomeRecord drive_alice(ByteStream& stream, const ProtocolParams& params,
                          const CodecConfig& codec, std::vector<double> raw,
                          double snr_for_beta) {
    AliceSession alice(params, codec, std::move(raw));
    FrameParser parser;
    std::vector<PassDelta> pending;
    bool tag_seen = false;
    try {
        while (!alice.finished()) {
            const auto frame = read_frame(stream, parser);
            if (!frame) {
                alice.on_abort();
                break;
            }
            switch (frame->type) {
                case MsgType::kHello:
                    alice.check_hello(unpack_hello(frame->payload));
                    break;
                case MsgType::kDelta:
                    pending.push_back(unpack_delta(frame->payload));
                    // After the opening, every NACK buys exactly one pass.
                    if (!tag_seen)
                        break;
                    [[fallthrough]];
                case MsgType::kCrcTag: {
                    if (frame->type == MsgType::kCrcTag) {
                        alice.set_expected_tag(unpack_crc(frame->payload));
                        tag_seen = true;
                    }
                    const Verdict verdict = alice.attempt(pending);
                    pending.clear();
                    if (verdict == Verdict::kAck)
                        send_frame(stream, MsgType::kAck);
                    else if (verdict == Verdict::kNack)
                        send_frame(stream, MsgType::kNack);
                    else
                        send_frame(stream, MsgType::kAbort);
                    break;
                }
                case MsgType::kAbort:
                    alice.on_abort();
                    break;
                default:
                    throw protocol_error("unexpected frame for Alice");
            }
        }
    } catch (const protocol_error&) {
        try {
            send_frame(stream, MsgType::kAbort);
        } catch (const io_error&) {}
        alice.on_abort();
    } catch (const resource_exhausted&) {
        try {
            send_frame(stream, MsgType::kAbort);
        } catch (const io_error&) {}
        alice.on_abort();
    } catch (const io_error&) {
        alice.on_abort();
    }
    stream.shutdown();
    return finalize(alice, snr_for_beta);
}

}  // namespace

OutcomeRecord run_session(Role role, ByteStream& stream,
                          const ProtocolParams& params, const CodecConfig& codec,
                          std::vector<double> raw, uint64_t key_seed,
                          double snr_for_beta) {
    const auto t0 = std::chrono::steady_clock::now();
    OutcomeRecord rec =
        (role == Role::kBob)
            ? drive_bob(stream, params, codec, std::move(raw), key_seed, snr_for_beta)
            : drive_alice(stream, params, codec, std::move(raw), snr_for_beta);
    rec.millis = std::chrono::duration<double, std::milli>(
                     std::chrono::steady_clock::now() - t0)
                     .count();
    return rec;
}

}  // namespace spinal
