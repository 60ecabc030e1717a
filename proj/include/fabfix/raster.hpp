#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "fabfix/errors.hpp"

namespace fabfix {

/// Binary raster of a layout or fabricated structure; 1 = silicon.
struct Bitmap {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> values; // row-major, each value in {0,1}

    Bitmap() = default;
    Bitmap(int w, int h, std::uint8_t fill = 0);

    std::uint8_t& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
    std::uint8_t at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    std::size_t foreground_count() const;

    bool operator==(const Bitmap&) const = default;
};

/// Real-valued raster in [0,1]; model probabilities and stitched averages.
struct Field {
    int width = 0;
    int height = 0;
    std::vector<float> values; // row-major

    Field() = default;
    Field(int w, int h, float fill = 0.0f);

    float& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
    float at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }

    bool operator==(const Field&) const = default;
};

/// Axis-aligned rectangle in pixel coordinates, half-open in effect:
/// a pixel belongs to the rectangle iff its center lies inside.
struct Rect {
    int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

/// Paint rectangles onto a blank canvas. A pixel is foreground iff its
/// center lies in any rectangle; overlaps are idempotent.
/// Throws BoundsError if a rectangle leaves the canvas.
Bitmap rasterize(const std::vector<Rect>& rectangles, int width, int height);

/// Ordered collection of square patches with their source offsets.
/// Iteration order is row-major by offset.
template <class T>
struct BasicPatchSet {
    int patch_size = 0;
    int stride = 0;
    std::vector<std::pair<int, int>> offsets; // (x, y) of each patch origin
    std::vector<T> data;                      // patch_size^2 values per patch, blocked

    std::size_t count() const { return offsets.size(); }
    std::size_t patch_values() const { return static_cast<std::size_t>(patch_size) * patch_size; }

    T* patch(std::size_t i) { return data.data() + i * patch_values(); }
    const T* patch(std::size_t i) const { return data.data() + i * patch_values(); }
};

using PatchSet = BasicPatchSet<float>;
using BitPatchSet = BasicPatchSet<std::uint8_t>;

/// Smallest canvas extent >= dim that fits the patch grid exactly
/// (bottom/right zero padding, Design Decision D1).
int padded_extent(int dim, int patch_size, int stride);

/// Number of patches along one axis after D1 padding.
int patch_grid_count(int dim, int patch_size, int stride);

/// Slice a raster into overlapping patches at the given stride.
/// The source is zero-padded bottom/right to the smallest conforming size.
BitPatchSet slice_patches(const Bitmap& image, int patch_size, int stride);
PatchSet slice_patches(const Field& image, int patch_size, int stride);

/// Average overlapping patches back into a (width x height) field,
/// cropping away the D1 padding region. Every output pixel must be
/// covered by at least one patch.
Field stitch(const PatchSet& patches, int width, int height);

} // namespace fabfix
