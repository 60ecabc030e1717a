#pragma once

#include "fabfix/raster.hpp"
#include "fabfix/training.hpp"

namespace fabfix {

struct InferenceParams {
    int stride = 4;                  ///< scanning step size, 1..patch
    double binarize_threshold = 0.5;
    double band_lo = 0.1, band_hi = 0.9; ///< uncertainty band
    int batch_size = 32;
    int threads = 0; ///< patch-chunk parallelism; 0 = hardware concurrency

    void validate(int patch) const;
};

/// Slice the image at the scan stride, run every patch through the
/// ensemble (member outputs averaged per patch), stitch the overlapping
/// outputs by averaging, and crop the padding. `use` guards against
/// applying an ensemble in the wrong direction.
Field infer_full(const Bitmap& image, const Ensemble& ensemble, const InferenceParams& params,
                 Ensemble::Role use);

/// Pixel is foreground iff value >= threshold.
Bitmap binarize(const Field& field, double threshold);

/// Pixel is set iff lo < value < hi (the model's uncertainty region).
Bitmap uncertainty_mask(const Field& field, double lo, double hi);

struct Correction {
    Bitmap correction;
    Field field;
};

/// Full-image correction: corrector-ensemble inference plus binarization.
Correction correct_layout(const Bitmap& nominal, const Ensemble& corrector, const InferenceParams& params);

} // namespace fabfix
