#include "fabfix/patterns.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fabfix/rng.hpp"

namespace fabfix {

void PatternSpec::validate() const {
    if (width < 16 || height < 16) throw ParamError("pattern canvas must be at least 16x16");
    if (min_shapes < 1 || max_shapes < min_shapes) throw ParamError("invalid n_shapes range");
    if (min_feature < 2) throw ParamError("min_feature must be >= 2 px");
    if (max_feature < min_feature) throw ParamError("feature_size_range is inverted");
    double total = 0.0;
    for (double w : shape_mix) {
        if (w < 0.0) throw ParamError("shape_mix weights must be >= 0");
        total += w;
    }
    if (total <= 0.0) throw ParamError("shape_mix weights must not all be zero");
}

namespace {

struct Pt {
    double x, y;
};

void paint_rect(Bitmap& bm, double cx, double cy, double w, double h) {
    int x0 = std::max(0, static_cast<int>(std::ceil(cx - w / 2 - 0.5)));
    int x1 = std::min(bm.width - 1, static_cast<int>(std::floor(cx + w / 2 - 0.5)));
    int y0 = std::max(0, static_cast<int>(std::ceil(cy - h / 2 - 0.5)));
    int y1 = std::min(bm.height - 1, static_cast<int>(std::floor(cy + h / 2 - 0.5)));
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) bm.at(x, y) = 1;
    }
}

// Even-odd scanline fill against pixel centers.
void paint_polygon(Bitmap& bm, const std::vector<Pt>& pts) {
    double miny = pts[0].y, maxy = pts[0].y;
    for (const Pt& p : pts) {
        miny = std::min(miny, p.y);
        maxy = std::max(maxy, p.y);
    }
    int y0 = std::max(0, static_cast<int>(std::floor(miny - 0.5)));
    int y1 = std::min(bm.height - 1, static_cast<int>(std::ceil(maxy)));
    std::vector<double> xs;
    for (int y = y0; y <= y1; ++y) {
        double sy = y + 0.5;
        xs.clear();
        for (std::size_t i = 0, j = pts.size() - 1; i < pts.size(); j = i++) {
            const Pt &a = pts[j], &b = pts[i];
            if ((a.y <= sy && b.y > sy) || (b.y <= sy && a.y > sy)) {
                xs.push_back(a.x + (sy - a.y) / (b.y - a.y) * (b.x - a.x));
            }
        }
        std::sort(xs.begin(), xs.end());
        for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
            int xa = std::max(0, static_cast<int>(std::ceil(xs[k] - 0.5)));
            int xb = std::min(bm.width - 1, static_cast<int>(std::ceil(xs[k + 1] - 0.5)) - 1);
            for (int x = xa; x <= xb; ++x) bm.at(x, y) = 1;
        }
    }
}

void paint_disk(Bitmap& bm, double cx, double cy, double r) {
    int x0 = std::max(0, static_cast<int>(std::floor(cx - r - 1)));
    int x1 = std::min(bm.width - 1, static_cast<int>(std::ceil(cx + r + 1)));
    int y0 = std::max(0, static_cast<int>(std::floor(cy - r - 1)));
    int y1 = std::min(bm.height - 1, static_cast<int>(std::ceil(cy + r + 1)));
    double r2 = r * r;
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            if (dx * dx + dy * dy <= r2) bm.at(x, y) = 1;
        }
    }
}

void paint_ring(Bitmap& bm, double cx, double cy, double r_out, double r_in) {
    int x0 = std::max(0, static_cast<int>(std::floor(cx - r_out - 1)));
    int x1 = std::min(bm.width - 1, static_cast<int>(std::ceil(cx + r_out + 1)));
    int y0 = std::max(0, static_cast<int>(std::floor(cy - r_out - 1)));
    int y1 = std::min(bm.height - 1, static_cast<int>(std::ceil(cy + r_out + 1)));
    double ro2 = r_out * r_out, ri2 = r_in * r_in;
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            double dx = x + 0.5 - cx, dy = y + 0.5 - cy;
            double d2 = dx * dx + dy * dy;
            if (d2 <= ro2 && d2 > ri2) bm.at(x, y) = 1;
        }
    }
}

std::vector<Pt> rotated_bar(double cx, double cy, double length, double width, double angle) {
    double ca = std::cos(angle), sa = std::sin(angle);
    double lx = ca * length / 2, ly = sa * length / 2;
    double wx = -sa * width / 2, wy = ca * width / 2;
    return {{cx - lx - wx, cy - ly - wy},
            {cx + lx - wx, cy + ly - wy},
            {cx + lx + wx, cy + ly + wy},
            {cx - lx + wx, cy - ly + wy}};
}

ShapeKind pick_kind(std::mt19937_64& rng, const std::array<double, kShapeKinds>& mix) {
    double total = std::accumulate(mix.begin(), mix.end(), 0.0);
    double r = rng_unit(rng) * total;
    for (int k = 0; k < kShapeKinds; ++k) {
        r -= mix[static_cast<std::size_t>(k)];
        if (r < 0.0) return static_cast<ShapeKind>(k);
    }
    return ShapeKind::Blob;
}

// Paints one shape of characteristic feature size f centered at (cx, cy).
// "exact" pins the proportions used for the guaranteed min-feature shape.
void paint_shape(Bitmap& bm, std::mt19937_64& rng, ShapeKind kind, double f, double cx, double cy, bool exact) {
    switch (kind) {
    case ShapeKind::Rectangle: {
        double w = exact ? f : f * rng_range(rng, 1.0, 4.0);
        double h = exact ? f : f * rng_range(rng, 1.0, 4.0);
        paint_rect(bm, cx, cy, w, h);
        break;
    }
    case ShapeKind::Bar: {
        double len = f * (exact ? 4.0 : rng_range(rng, 4.0, 10.0));
        double angle = exact ? 0.0 : rng_range(rng, 0.0, 3.14159265358979323846);
        paint_polygon(bm, rotated_bar(cx, cy, len, f, angle));
        break;
    }
    case ShapeKind::Cross: {
        double len = f * (exact ? 3.0 : rng_range(rng, 3.0, 8.0));
        paint_rect(bm, cx, cy, len, f);
        paint_rect(bm, cx, cy, f, len);
        break;
    }
    case ShapeKind::Star: {
        int points = exact ? 5 : static_cast<int>(rng_int(rng, 5, 8));
        double outer = exact ? f : f * rng_range(rng, 1.2, 3.0);
        double inner = outer * (exact ? 0.45 : rng_range(rng, 0.38, 0.55));
        double phase = exact ? -1.57079632679489661923 : rng_range(rng, 0.0, 6.28318530717958647692);
        std::vector<Pt> pts;
        for (int i = 0; i < 2 * points; ++i) {
            double r = (i % 2 == 0) ? outer : inner;
            double a = phase + i * 3.14159265358979323846 / points;
            pts.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
        }
        paint_polygon(bm, pts);
        break;
    }
    case ShapeKind::Disk:
        paint_disk(bm, cx, cy, exact ? f / 2.0 : f * rng_range(rng, 0.5, 1.5));
        break;
    case ShapeKind::Ring: {
        double r_out = f * (exact ? 1.5 : rng_range(rng, 1.5, 4.0));
        paint_ring(bm, cx, cy, r_out, r_out - f);
        break;
    }
    case ShapeKind::Blob: {
        int verts = exact ? 10 : static_cast<int>(rng_int(rng, 8, 14));
        double base = exact ? f / 2.0 : f * rng_range(rng, 0.8, 2.0);
        std::vector<Pt> pts;
        for (int i = 0; i < verts; ++i) {
            double a = (i + rng_range(rng, -0.3, 0.3)) * 6.28318530717958647692 / verts;
            double r = base * rng_range(rng, 0.45, 1.0);
            pts.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
        }
        paint_polygon(bm, pts);
        break;
    }
    }
}

bool region_free(const Bitmap& bm, double cx, double cy, double half) {
    int x0 = std::max(0, static_cast<int>(cx - half));
    int x1 = std::min(bm.width - 1, static_cast<int>(cx + half));
    int y0 = std::max(0, static_cast<int>(cy - half));
    int y1 = std::min(bm.height - 1, static_cast<int>(cy + half));
    for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
            if (bm.at(x, y)) return false;
        }
    }
    return true;
}

} // namespace

Bitmap generate_pattern(const PatternSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);

    const double fmax_canvas = std::min(spec.width, spec.height) / 2.0;
    const double fmin = std::min<double>(spec.min_feature, fmax_canvas);
    const double fmax = std::min<double>(spec.max_feature, fmax_canvas);

    const double total_px = static_cast<double>(spec.width) * spec.height;
    for (int attempt = 0; attempt < 1000; ++attempt) {
        Bitmap bm(spec.width, spec.height, 0);
        const int n = static_cast<int>(rng_int(rng, spec.min_shapes, spec.max_shapes));

        for (int s = 1; s < n; ++s) {
            ShapeKind kind = pick_kind(rng, spec.shape_mix);
            double f = rng_log_range(rng, fmin, std::max(fmin + 1.0, fmax));
            double cx = rng_range(rng, 0.0, spec.width);
            double cy = rng_range(rng, 0.0, spec.height);
            paint_shape(bm, rng, kind, f, cx, cy, false);
        }

        // One shape at exactly the minimum feature size, placed clear of the
        // rest so it survives as its own feature.
        ShapeKind kind = pick_kind(rng, spec.shape_mix);
        bool placed = false;
        for (int t = 0; t < 200 && !placed; ++t) {
            double cx = rng_range(rng, fmin, spec.width - fmin);
            double cy = rng_range(rng, fmin, spec.height - fmin);
            if (region_free(bm, cx, cy, fmin * 2.0 + 2.0)) {
                paint_shape(bm, rng, kind, fmin, cx, cy, true);
                placed = true;
            }
        }
        if (!placed) continue;

        double density = static_cast<double>(bm.foreground_count()) / total_px;
        if (density >= 0.15 && density <= 0.85) return bm;
    }
    throw GenerationError("could not satisfy the density bound after 1000 attempts (seed " +
                          std::to_string(spec.seed) + ")");
}

std::vector<Bitmap> generate_corpus(const PatternSpec& spec_base, int n_patterns) {
    if (n_patterns < 1) throw ParamError("n_patterns must be >= 1");
    std::vector<Bitmap> out;
    out.reserve(static_cast<std::size_t>(n_patterns));
    for (int i = 0; i < n_patterns; ++i) {
        PatternSpec spec = spec_base;
        spec.seed = spec_base.seed + static_cast<std::uint64_t>(i);
        out.push_back(generate_pattern(spec));
    }
    return out;
}

} // namespace fabfix
