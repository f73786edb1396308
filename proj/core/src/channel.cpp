#include "spinal/channel.hpp"

#include <cmath>
#include <cstdio>
#include <cstring>
#include <memory>
#include <stdexcept>

#include "spinal/errors.hpp"
#include "spinal/philox.hpp"

namespace spinal {

RawDataBlock generate_correlated(size_t count, double v_a, double snr, uint64_t seed) {
    if (count < 1)
        throw std::invalid_argument("generate_correlated: count must be >= 1");
    if (!(v_a > 0.0))
        throw std::invalid_argument("generate_correlated: v_a must be positive");
    if (!(snr > 0.0))
        throw std::invalid_argument("generate_correlated: snr must be positive");

    RawDataBlock block;
    block.v_a = v_a;
    block.v_z = v_a / snr;
    block.seed = seed;
    block.x.resize(count);
    block.y.resize(count);

    GaussianStream xs(seed, 0);
    GaussianStream zs(seed, 1);
    const double sx = std::sqrt(v_a);
    const double sz = std::sqrt(block.v_z);
    for (size_t i = 0; i < count; ++i) {
        block.x[i] = sx * xs.at(i);
        block.y[i] = block.x[i] + sz * zs.at(i);
    }
    return block;
}

RawDataBlock generate_noiseless(size_t count, double v_a, double snr, uint64_t seed) {
    if (count < 1)
        throw std::invalid_argument("generate_noiseless: count must be >= 1");
    RawDataBlock block;
    block.v_a = v_a;
    block.v_z = (snr > 0.0) ? v_a / snr : 0.0;
    block.seed = seed;
    block.x.assign(count, 0.0);
    block.y.assign(count, 0.0);
    return block;
}

std::vector<double> compute_differences(std::span<const double> y,
                                        std::span<const double> symbols) {
    if (y.size() != symbols.size())
        throw std::invalid_argument("compute_differences: length mismatch");
    std::vector<double> delta(y.size());
    for (size_t i = 0; i < y.size(); ++i)
        delta[i] = y[i] - symbols[i];
    return delta;
}

std::vector<double> recover_side_info(std::span<const double> x,
                                      std::span<const double> delta) {
    if (x.size() != delta.size())
        throw std::invalid_argument("recover_side_info: length mismatch");
    std::vector<double> side(x.size());
    for (size_t i = 0; i < x.size(); ++i)
        side[i] = x[i] - delta[i];
    return side;
}

namespace {

constexpr char kMagic[4] = {'C', 'V', 'R', 'W'};
constexpr uint16_t kVersion = 1;

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void put_bytes(std::FILE* f, const void* p, size_t n, const std::string& path) {
    if (std::fwrite(p, 1, n, f) != n)
        throw io_error("write failed: " + path);
}

void get_bytes(std::FILE* f, void* p, size_t n, const std::string& path) {
    if (std::fread(p, 1, n, f) != n)
        throw io_error("short read: " + path);
}

// Dumps target little-endian machines; all supported platforms here are.
static_assert(std::endian::native == std::endian::little,
              "raw-block dump assumes a little-endian host");

}  // namespace

void dump_raw_block(const RawDataBlock& block, const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f)
        throw io_error("cannot open for writing: " + path);
    const uint64_t count = block.x.size();
    put_bytes(f.get(), kMagic, 4, path);
    put_bytes(f.get(), &kVersion, 2, path);
    put_bytes(f.get(), &count, 8, path);
    put_bytes(f.get(), &block.v_a, 8, path);
    put_bytes(f.get(), &block.v_z, 8, path);
    put_bytes(f.get(), &block.seed, 8, path);
    put_bytes(f.get(), block.x.data(), count * 8, path);
    put_bytes(f.get(), block.y.data(), count * 8, path);
}

RawDataBlock load_raw_block(const std::string& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f)
        throw io_error("cannot open for reading: " + path);
    char magic[4];
    get_bytes(f.get(), magic, 4, path);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw io_error("bad magic (expected CVRW): " + path);
    uint16_t version = 0;
    get_bytes(f.get(), &version, 2, path);
    if (version != kVersion)
        throw io_error("unsupported raw-block version: " + path);
    uint64_t count = 0;
    RawDataBlock block;
    get_bytes(f.get(), &count, 8, path);
    get_bytes(f.get(), &block.v_a, 8, path);
    get_bytes(f.get(), &block.v_z, 8, path);
    get_bytes(f.get(), &block.seed, 8, path);
    block.x.resize(count);
    block.y.resize(count);
    get_bytes(f.get(), block.x.data(), count * 8, path);
    get_bytes(f.get(), block.y.data(), count * 8, path);
    return block;
}

}  // namespace spinal
