#include "fabfix/correct.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <string>
#include <thread>

namespace fabfix {

void InferenceParams::validate(int patch) const {
    if (stride < 1 || stride > patch) {
        throw ParamError("inference stride must lie in [1, " + std::to_string(patch) + "], got " +
                         std::to_string(stride));
    }
    if (!(binarize_threshold > 0.0 && binarize_threshold < 1.0)) {
        throw ParamError("binarize threshold must lie in (0,1)");
    }
    if (!(band_lo > 0.0 && band_lo < band_hi && band_hi < 1.0)) {
        throw ParamError("uncertainty band must satisfy 0 < lo < hi < 1");
    }
    if (batch_size < 1) throw ParamError("inference batch size must be >= 1");
}

Field infer_full(const Bitmap& image, const Ensemble& ensemble, const InferenceParams& params,
                 Ensemble::Role use) {
    if (ensemble.members.empty()) throw ParamError("inference requires a non-empty ensemble");
    if (ensemble.role != use) {
        throw ParamError(std::string("ensemble role mismatch: have ") +
                         (ensemble.role == Ensemble::Role::Forward ? "forward" : "corrector") + ", need " +
                         (use == Ensemble::Role::Forward ? "forward" : "corrector"));
    }
    const int patch = ensemble.members.front().arch.patch;
    params.validate(patch);

    BitPatchSet slices = slice_patches(image, patch, params.stride);
    if (slices.count() == 0) throw ShapeError("image produced no patches");

    PatchSet outputs;
    outputs.patch_size = patch;
    outputs.stride = params.stride;
    outputs.offsets = slices.offsets;
    outputs.data.assign(slices.data.size(), 0.0f);

    // Patches are independent; chunks of whole batches are distributed over
    // threads and each writes only its own output blocks, so the result is
    // identical for any thread count.
    const std::size_t pv = outputs.patch_values();
    const std::size_t n_batches = (slices.count() + params.batch_size - 1) / params.batch_size;
    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    const unsigned n_threads = static_cast<unsigned>(
        std::min<std::size_t>(params.threads > 0 ? static_cast<unsigned>(params.threads) : hw, n_batches));

    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(std::max<unsigned>(n_threads, 1));
    auto worker = [&](unsigned tid) {
        try {
            for (;;) {
                const std::size_t bi = next.fetch_add(1);
                if (bi >= n_batches) return;
                const std::size_t first = bi * static_cast<std::size_t>(params.batch_size);
                const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(params.batch_size),
                                                                slices.count() - first);
                Tensor4<float> batch(static_cast<int>(count), patch, patch, 1);
                for (std::size_t b = 0; b < count; ++b) {
                    const std::uint8_t* src = slices.patch(first + b);
                    float* dst = batch.values.data() + b * pv;
                    for (std::size_t i = 0; i < pv; ++i) dst[i] = static_cast<float>(src[i]);
                }
                Tensor4<float> mean = ensemble_mean_forward(ensemble, batch);
                for (std::size_t b = 0; b < count; ++b) {
                    std::copy(mean.values.begin() + static_cast<std::ptrdiff_t>(b * pv),
                              mean.values.begin() + static_cast<std::ptrdiff_t>((b + 1) * pv),
                              outputs.patch(first + b));
                }
            }
        } catch (...) {
            errors[tid] = std::current_exception();
        }
    };

    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker, t);
    worker(0);
    for (std::thread& t : pool) t.join();
    for (const std::exception_ptr& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    return stitch(outputs, image.width, image.height);
}

Bitmap binarize(const Field& field, double threshold) {
    if (!(threshold > 0.0 && threshold < 1.0)) throw ParamError("binarize threshold must lie in (0,1)");
    Bitmap out(field.width, field.height);
    for (std::size_t i = 0; i < field.values.size(); ++i) {
        out.values[i] = static_cast<double>(field.values[i]) >= threshold ? 1 : 0;
    }
    return out;
}

Bitmap uncertainty_mask(const Field& field, double lo, double hi) {
    if (!(lo > 0.0 && lo < hi && hi < 1.0)) throw ParamError("uncertainty band must satisfy 0 < lo < hi < 1");
    Bitmap out(field.width, field.height);
    for (std::size_t i = 0; i < field.values.size(); ++i) {
        const double v = field.values[i];
        out.values[i] = (v > lo && v < hi) ? 1 : 0;
    }
    return out;
}

Correction correct_layout(const Bitmap& nominal, const Ensemble& corrector, const InferenceParams& params) {
    Correction result;
    result.field = infer_full(nominal, corrector, params, Ensemble::Role::Corrector);
    result.correction = binarize(result.field, params.binarize_threshold);
    return result;
}

} // namespace fabfix
