#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "fabfix/raster.hpp"

namespace fabfix {

/// Shape vocabulary of the training-pattern generator. The mix covers the
/// deviation modes the corrector must learn: convex/concave corners (bars,
/// crosses, stars, blobs), islands (disks), and narrow channels (rings).
enum class ShapeKind : int {
    Rectangle = 0,
    Bar,
    Cross,
    Star,
    Disk,
    Ring,
    Blob,
};
inline constexpr int kShapeKinds = 7;

/// Seeded description of one random training layout.
struct PatternSpec {
    int width = 2048;
    int height = 1536;
    int min_shapes = 20;
    int max_shapes = 60;
    std::array<double, kShapeKinds> shape_mix{1, 1, 1, 1, 1, 1, 1};
    int min_feature = 8;   ///< smallest characteristic feature size, pixels (>= 2)
    int max_feature = 384; ///< largest characteristic feature size, pixels
    std::uint64_t seed = 1;

    void validate() const;
};

/// Deterministic random layout for the given spec. Foreground fraction is
/// kept inside [0.15, 0.85] by rejection sampling; one shape is drawn at
/// exactly min_feature size. Throws GenerationError after 1000 attempts.
Bitmap generate_pattern(const PatternSpec& spec);

/// n_patterns layouts from seeds spec.seed .. spec.seed + n_patterns - 1.
std::vector<Bitmap> generate_corpus(const PatternSpec& spec_base, int n_patterns);

} // namespace fabfix
