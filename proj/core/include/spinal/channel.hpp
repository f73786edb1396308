#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace spinal {

/// Correlated Gaussian raw data for one block: Alice holds x, Bob holds
/// y = x + z with z ~ N(0, v_z) i.i.d.
struct RawDataBlock {
    std::vector<double> x;
    std::vector<double> y;
    double v_a = 0.0;
    double v_z = 0.0;
    uint64_t seed = 0;
};

/// count samples of (x, y) at the given SNR, reproducible from seed
/// (Philox4x32 + Box-Muller). v_z = v_a / snr.
RawDataBlock generate_correlated(size_t count, double v_a, double snr, uint64_t seed);

/// Valid "zero noise" realization: x = y identically zero, z = 0. The
/// difference algebra below is then exact in floating point.
RawDataBlock generate_noiseless(size_t count, double v_a, double snr, uint64_t seed);

/// Bob's difference sequence: delta_i = y_i - c_i.
std::vector<double> compute_differences(std::span<const double> y,
                                        std::span<const double> symbols);

/// Alice's side information: c'_i = x_i - delta_i (= c_i - z_i up to
/// floating-point rounding of the two subtractions).
std::vector<double> recover_side_info(std::span<const double> x,
                                      std::span<const double> delta);

/// Raw-block dump: header [magic "CVRW" | version u16 | count u64 | v_a f64
/// | v_z f64 | seed u64], all little-endian, then x[count] and y[count] as
/// little-endian IEEE-754 doubles.
void dump_raw_block(const RawDataBlock& block, const std::string& path);
RawDataBlock load_raw_block(const std::string& path);

}  // namespace spinal
