#include "fabfix/raster.hpp"

#include <algorithm>
#include <string>

namespace fabfix {

Bitmap::Bitmap(int w, int h, std::uint8_t fill) : width(w), height(h) {
    if (w < 1 || h < 1) throw ParamError("Bitmap dimensions must be >= 1, got " + std::to_string(w) + "x" + std::to_string(h));
    values.assign(static_cast<std::size_t>(w) * h, fill);
}

std::size_t Bitmap::foreground_count() const {
    std::size_t n = 0;
    for (std::uint8_t v : values) n += v;
    return n;
}

Field::Field(int w, int h, float fill) : width(w), height(h) {
    if (w < 1 || h < 1) throw ParamError("Field dimensions must be >= 1, got " + std::to_string(w) + "x" + std::to_string(h));
    values.assign(static_cast<std::size_t>(w) * h, fill);
}

Bitmap rasterize(const std::vector<Rect>& rectangles, int width, int height) {
    Bitmap out(width, height, 0);
    for (const Rect& r : rectangles) {
        if (r.x0 < 0 || r.y0 < 0 || r.x1 > width || r.y1 > height || r.x0 >= r.x1 || r.y0 >= r.y1) {
            throw BoundsError("rectangle (" + std::to_string(r.x0) + "," + std::to_string(r.y0) + "," +
                              std::to_string(r.x1) + "," + std::to_string(r.y1) + ") outside canvas " +
                              std::to_string(width) + "x" + std::to_string(height));
        }
        // Pixel-center rule: integer bounds make this a half-open box test.
        for (int y = r.y0; y < r.y1; ++y) {
            std::uint8_t* row = out.values.data() + static_cast<std::size_t>(y) * width;
            std::fill(row + r.x0, row + r.x1, std::uint8_t{1});
        }
    }
    return out;
}

int padded_extent(int dim, int patch_size, int stride) {
    if (patch_size <= 0 || stride <= 0) throw ParamError("patch_size and stride must be positive");
    if (dim <= patch_size) return patch_size;
    int over = (dim - patch_size) % stride;
    return over == 0 ? dim : dim + (stride - over);
}

int patch_grid_count(int dim, int patch_size, int stride) {
    return (padded_extent(dim, patch_size, stride) - patch_size) / stride + 1;
}

namespace {

template <class T, class Image>
BasicPatchSet<T> slice_impl(const Image& image, int patch_size, int stride) {
    if (patch_size <= 0 || stride <= 0) {
        throw ParamError("slice_patches requires patch_size > 0 and stride > 0, got " +
                         std::to_string(patch_size) + ", " + std::to_string(stride));
    }
    const int cols = patch_grid_count(image.width, patch_size, stride);
    const int rows = patch_grid_count(image.height, patch_size, stride);

    BasicPatchSet<T> set;
    set.patch_size = patch_size;
    set.stride = stride;
    set.offsets.reserve(static_cast<std::size_t>(cols) * rows);
    set.data.resize(static_cast<std::size_t>(cols) * rows * patch_size * patch_size, T{});

    std::size_t p = 0;
    for (int gy = 0; gy < rows; ++gy) {
        for (int gx = 0; gx < cols; ++gx, ++p) {
            const int ox = gx * stride;
            const int oy = gy * stride;
            set.offsets.emplace_back(ox, oy);
            T* dst = set.data.data() + p * set.patch_values();
            const int copy_h = std::min(patch_size, image.height - oy);
            const int copy_w = std::min(patch_size, image.width - ox);
            for (int y = 0; y < copy_h; ++y) {
                const auto* src = image.values.data() + static_cast<std::size_t>(oy + y) * image.width + ox;
                std::copy(src, src + copy_w, dst + static_cast<std::size_t>(y) * patch_size);
            }
            // remaining rows/cols stay zero (D1 padding)
        }
    }
    return set;
}

} // namespace

BitPatchSet slice_patches(const Bitmap& image, int patch_size, int stride) {
    return slice_impl<std::uint8_t>(image, patch_size, stride);
}

PatchSet slice_patches(const Field& image, int patch_size, int stride) {
    return slice_impl<float>(image, patch_size, stride);
}

Field stitch(const PatchSet& patches, int width, int height) {
    if (width < 1 || height < 1) throw ParamError("stitch target dimensions must be >= 1");
    int ext_w = width, ext_h = height;
    for (const auto& [ox, oy] : patches.offsets) {
        ext_w = std::max(ext_w, ox + patches.patch_size);
        ext_h = std::max(ext_h, oy + patches.patch_size);
    }

    // Double accumulators keep the mean order-invariant in practice and make
    // the unmodified-crop round trip exact.
    std::vector<double> sum(static_cast<std::size_t>(ext_w) * ext_h, 0.0);
    std::vector<std::uint32_t> cover(sum.size(), 0);

    const int ps = patches.patch_size;
    for (std::size_t p = 0; p < patches.count(); ++p) {
        const auto [ox, oy] = patches.offsets[p];
        if (ox < 0 || oy < 0) throw BoundsError("patch offset may not be negative");
        const float* src = patches.patch(p);
        for (int y = 0; y < ps; ++y) {
            double* srow = sum.data() + static_cast<std::size_t>(oy + y) * ext_w + ox;
            std::uint32_t* crow = cover.data() + static_cast<std::size_t>(oy + y) * ext_w + ox;
            for (int x = 0; x < ps; ++x) {
                srow[x] += src[static_cast<std::size_t>(y) * ps + x];
                crow[x] += 1;
            }
        }
    }

    Field out(width, height, 0.0f);
    for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * ext_w + x;
            if (cover[i] == 0) {
                throw InternalError("stitch: pixel (" + std::to_string(x) + "," + std::to_string(y) +
                                    ") covered by zero patches");
            }
            out.at(x, y) = static_cast<float>(sum[i] / cover[i]);
        }
    }
    return out;
}

} // namespace fabfix
