#include "fabfix/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace fabfix {

std::size_t DiffMap::count(DiffCode c) const {
    std::size_t n = 0;
    for (DiffCode v : codes) n += (v == c) ? 1 : 0;
    return n;
}

long long error_pixels(const Bitmap& a, const Bitmap& b) {
    if (a.width != b.width || a.height != b.height) {
        throw ShapeError("error_pixels: " + std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                         std::to_string(b.width) + "x" + std::to_string(b.height));
    }
    long long n = 0;
    for (std::size_t i = 0; i < a.values.size(); ++i) n += (a.values[i] != b.values[i]) ? 1 : 0;
    return n;
}

ReductionFactor reduction_factor(long long e_uncorrected, long long e_corrected) {
    if (e_uncorrected < 0 || e_corrected < 0) throw ParamError("error-pixel counts must be >= 0");
    ReductionFactor r;
    if (e_corrected == 0) {
        r.finite = false;
        r.ratio = std::numeric_limits<double>::infinity();
        return r;
    }
    r.ratio = static_cast<double>(e_uncorrected) / static_cast<double>(e_corrected);
    return r;
}

std::string ReductionFactor::display() const {
    if (!finite) return "∞";
    char buf[32];
    // one-decimal reporting, half away from zero
    std::snprintf(buf, sizeof(buf), "%.1f", std::round(ratio * 10.0) / 10.0);
    return buf;
}

DiffMap diff_map(const Bitmap& nominal, const Bitmap& other) {
    if (nominal.width != other.width || nominal.height != other.height) {
        throw ShapeError("diff_map: " + std::to_string(nominal.width) + "x" + std::to_string(nominal.height) +
                         " vs " + std::to_string(other.width) + "x" + std::to_string(other.height));
    }
    DiffMap map;
    map.width = nominal.width;
    map.height = nominal.height;
    map.codes.resize(nominal.values.size());
    for (std::size_t i = 0; i < nominal.values.size(); ++i) {
        if (nominal.values[i] == other.values[i]) {
            map.codes[i] = DiffCode::Unchanged;
        } else if (nominal.values[i] != 0) {
            map.codes[i] = DiffCode::Loss;
        } else {
            map.codes[i] = DiffCode::Gain;
        }
    }
    return map;
}

void write_diff_ppm(const DiffMap& map, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    out << "P6\n" << map.width << " " << map.height << "\n255\n";
    std::vector<unsigned char> row(static_cast<std::size_t>(map.width) * 3);
    for (int y = 0; y < map.height; ++y) {
        for (int x = 0; x < map.width; ++x) {
            unsigned char* px = row.data() + static_cast<std::size_t>(x) * 3;
            switch (map.codes[static_cast<std::size_t>(y) * map.width + x]) {
            case DiffCode::Unchanged: px[0] = 0;   px[1] = 255; px[2] = 0;   break;
            case DiffCode::Loss:      px[0] = 255; px[1] = 0;   px[2] = 0;   break;
            case DiffCode::Gain:      px[0] = 0;   px[1] = 0;   px[2] = 255; break;
            }
        }
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw FormatError("short write to '" + path + "'");
}

double evaluate_bce(const Ensemble& ensemble, const Dataset& dataset, Split split, Direction direction,
                    int batch_size) {
    if (batch_size < 1) throw ParamError("batch_size must be >= 1");
    const std::vector<std::size_t> idx = dataset.indices(split);
    if (idx.empty()) throw ParamError("evaluate_bce: the requested split is empty");

    const bool input_is_layout = direction == Direction::Forward;
    double sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t pos = 0; pos < idx.size(); pos += static_cast<std::size_t>(batch_size)) {
        const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(batch_size), idx.size() - pos);
        Tensor4<float> x = gather_batch(dataset, idx, pos, b, input_is_layout);
        Tensor4<float> y = gather_batch(dataset, idx, pos, b, !input_is_layout);
        Tensor4<float> p = ensemble_mean_forward(ensemble, x);
        sum += bce(p, y) * static_cast<double>(b);
        seen += b;
    }
    return sum / static_cast<double>(seen);
}

} // namespace fabfix
