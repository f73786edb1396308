#pragma once

namespace spinal {

/// Standard normal CDF.
double normal_cdf(double x);

/// Standard normal quantile (inverse CDF), Wichura's AS 241 rational
/// approximation (double-precision variant, abs error well below 1e-8).
/// Throws std::invalid_argument for p outside (0, 1).
double normal_quantile(double p);

}  // namespace spinal
