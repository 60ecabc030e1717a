#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fabfix/raster.hpp"
#include "fabfix/training.hpp"

namespace fabfix {

/// Per-pixel classification of two equal-size bitmaps.
enum class DiffCode : std::uint8_t {
    Unchanged = 0,
    Loss = 1, ///< in A (nominal), not in B
    Gain = 2, ///< in B, not in A
};

struct DiffMap {
    int width = 0;
    int height = 0;
    std::vector<DiffCode> codes;

    std::size_t count(DiffCode c) const;
};

/// Hamming distance between two equal-size bitmaps.
long long error_pixels(const Bitmap& a, const Bitmap& b);

/// Ratio of uncorrected to corrected error-pixel counts, reported to one
/// decimal; an exact zero denominator yields the infinity sentinel.
struct ReductionFactor {
    double ratio = 0.0;
    bool finite = true;
    std::string display() const; ///< e.g. "2.4", or the infinity sentinel
};
ReductionFactor reduction_factor(long long e_uncorrected, long long e_corrected);

DiffMap diff_map(const Bitmap& nominal, const Bitmap& other);

/// Diff map as binary PPM (P6): green unchanged, red loss, blue gain.
void write_diff_ppm(const DiffMap& map, const std::string& path);

enum class Direction {
    Forward, ///< input layout, label fabricated
    Inverse, ///< input fabricated, label layout
};

/// Mean BCE of the ensemble-mean outputs against labels over one split.
double evaluate_bce(const Ensemble& ensemble, const Dataset& dataset, Split split, Direction direction,
                    int batch_size = 32);

} // namespace fabfix
