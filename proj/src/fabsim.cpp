#include "fabfix/fabsim.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fabfix/rng.hpp"

namespace fabfix {

void FabParams::validate() const {
    if (sigma < 0.0) throw ParamError("fab sigma must be >= 0, got " + std::to_string(sigma));
    if (!(threshold > 0.0 && threshold < 1.0)) {
        throw ParamError("fab threshold must lie in (0,1), got " + std::to_string(threshold));
    }
    double bound = std::min(threshold, 1.0 - threshold);
    if (edge_noise_amp < 0.0 || edge_noise_amp >= bound) {
        throw ParamError("fab edge_noise_amp must lie in [0, min(threshold, 1-threshold)), got " +
                         std::to_string(edge_noise_amp));
    }
}

namespace {

std::vector<double> gaussian_factor(double sigma) {
    const int radius = static_cast<int>(std::ceil(3.0 * sigma));
    std::vector<double> g(static_cast<std::size_t>(2 * radius + 1));
    double sum = 0.0;
    for (int i = -radius; i <= radius; ++i) {
        double v = std::exp(-(static_cast<double>(i) * i) / (2.0 * sigma * sigma));
        g[static_cast<std::size_t>(i + radius)] = v;
        sum += v;
    }
    for (double& v : g) v /= sum;
    return g;
}

// Symmetric (edge-repeating) mirror of an out-of-range coordinate.
inline int mirror(int i, int n) {
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - 1 - i;
    }
    return i;
}

// Separable blur with symmetric boundary padding; double precision throughout.
std::vector<double> blur(const Bitmap& layout, double sigma) {
    const int w = layout.width, h = layout.height;
    std::vector<double> out(layout.pixel_count());
    if (sigma == 0.0) {
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = layout.values[i];
        return out;
    }
    const std::vector<double> g = gaussian_factor(sigma);
    const int radius = (static_cast<int>(g.size()) - 1) / 2;

    std::vector<double> rows(layout.pixel_count());
    for (int y = 0; y < h; ++y) {
        const std::uint8_t* src = layout.values.data() + static_cast<std::size_t>(y) * w;
        double* dst = rows.data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                acc += g[static_cast<std::size_t>(k + radius)] * src[mirror(x + k, w)];
            }
            dst[x] = acc;
        }
    }
    for (int y = 0; y < h; ++y) {
        double* dst = out.data() + static_cast<std::size_t>(y) * w;
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                acc += g[static_cast<std::size_t>(k + radius)] * rows[static_cast<std::size_t>(mirror(y + k, h)) * w + x];
            }
            dst[x] = acc;
        }
    }
    return out;
}

inline double noise_at(const FabParams& p, int x, int y) {
    if (p.edge_noise_amp == 0.0) return 0.0;
    return p.edge_noise_amp * (2.0 * coord_noise_unit(p.seed, x, y) - 1.0);
}

} // namespace

Kernel gaussian_kernel(double sigma) {
    if (!(sigma > 0.0)) throw ParamError("gaussian_kernel requires sigma > 0, got " + std::to_string(sigma));
    const std::vector<double> g = gaussian_factor(sigma);
    Kernel k;
    k.side = static_cast<int>(g.size());
    k.values.resize(static_cast<std::size_t>(k.side) * k.side);
    for (int y = 0; y < k.side; ++y) {
        for (int x = 0; x < k.side; ++x) {
            k.values[static_cast<std::size_t>(y) * k.side + x] = g[static_cast<std::size_t>(y)] * g[static_cast<std::size_t>(x)];
        }
    }
    return k;
}

Field fabricate_field(const Bitmap& layout, const FabParams& params) {
    params.validate();
    std::vector<double> field = blur(layout, params.sigma);
    Field out(layout.width, layout.height);
    for (int y = 0; y < layout.height; ++y) {
        for (int x = 0; x < layout.width; ++x) {
            double v = field[static_cast<std::size_t>(y) * layout.width + x] + noise_at(params, x, y);
            out.at(x, y) = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
    }
    return out;
}

Bitmap fabricate(const Bitmap& layout, const FabParams& params) {
    params.validate();
    std::vector<double> field = blur(layout, params.sigma);
    Bitmap out(layout.width, layout.height);
    for (int y = 0; y < layout.height; ++y) {
        for (int x = 0; x < layout.width; ++x) {
            double v = field[static_cast<std::size_t>(y) * layout.width + x] + noise_at(params, x, y);
            out.at(x, y) = v >= params.threshold ? 1 : 0;
        }
    }
    return out;
}

} // namespace fabfix
