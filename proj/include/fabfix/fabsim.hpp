#pragma once

#include <cstdint>
#include <vector>

#include "fabfix/raster.hpp"

namespace fabfix {

/// Parameters of the virtual fabrication oracle.
struct FabParams {
    double sigma = 3.0;          ///< Gaussian blur std-dev in pixels; 0 disables the blur
    double threshold = 0.5;      ///< binarization threshold, in (0,1)
    double edge_noise_amp = 0.0; ///< amplitude of per-pixel uniform noise, < min(threshold, 1-threshold)
    std::uint64_t seed = 0;      ///< keys the stateless per-pixel noise

    /// Throws ParamError if any bound is violated.
    void validate() const;
};

/// Square sampled-Gaussian kernel of side 2*ceil(3*sigma)+1, normalized to
/// sum 1. Built as the outer product of the 1-D factors, so it is exactly
/// 4-fold symmetric and exactly separable.
struct Kernel {
    int side = 0;
    std::vector<double> values; // row-major, side*side

    double at(int x, int y) const { return values[static_cast<std::size_t>(y) * side + x]; }
};

/// Throws ParamError for sigma <= 0.
Kernel gaussian_kernel(double sigma);

/// Blur + noise, clamped to [0,1]; the pre-threshold diagnostic field.
Field fabricate_field(const Bitmap& layout, const FabParams& params);

/// Deterministic "fabricated" outcome of a layout: Gaussian blur with
/// symmetric boundary padding, seeded per-pixel noise, threshold.
Bitmap fabricate(const Bitmap& layout, const FabParams& params);

} // namespace fabfix
