#pragma once

#include <string>

#include "fabfix/raster.hpp"

namespace fabfix {

// Binary PGM ("P5", maxval 255) is the sole raster interchange format.
// Bitmaps map {0,1} <-> {0,255}; Fields map linearly with round-half-up
// on write. Reading as Bitmap binarizes at byte >= 128.

Bitmap read_pgm(const std::string& path);
Field read_pgm_field(const std::string& path);

void write_pgm(const Bitmap& image, const std::string& path);
void write_pgm(const Field& image, const std::string& path);

} // namespace fabfix
