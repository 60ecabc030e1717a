#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fabfix/errors.hpp"

namespace fabfix {

/// Dense NHWC tensor (batch, height, width, channels).
template <class T>
struct Tensor4 {
    int n = 0, h = 0, w = 0, c = 0;
    std::vector<T> values;

    Tensor4() = default;
    Tensor4(int n_, int h_, int w_, int c_)
        : n(n_), h(h_), w(w_), c(c_), values(static_cast<std::size_t>(n_) * h_ * w_ * c_, T{}) {
        if (n_ < 1 || h_ < 1 || w_ < 1 || c_ < 1) throw ShapeError("Tensor4 dims must be >= 1");
    }

    std::size_t size() const { return values.size(); }

    T& at(int in, int iy, int ix, int ic) {
        return values[((static_cast<std::size_t>(in) * h + iy) * w + ix) * c + ic];
    }
    T at(int in, int iy, int ix, int ic) const {
        return values[((static_cast<std::size_t>(in) * h + iy) * w + ix) * c + ic];
    }

    bool same_shape(const Tensor4& o) const { return n == o.n && h == o.h && w == o.w && c == o.c; }
    std::string shape_str() const {
        return "[" + std::to_string(n) + "," + std::to_string(h) + "," + std::to_string(w) + "," +
               std::to_string(c) + "]";
    }
};

/// The fixed architecture: four 3x3 same-padded conv blocks (conv -> 2x2
/// average pool -> ReLU) with channel sizes 8, 8, 16, 16, then a dense
/// layer with sigmoid reshaped back to patch x patch. Only the patch edge
/// is parameterized (test harnesses run reduced geometry); it must be a
/// multiple of 16 so the four pools divide evenly.
struct ArchSpec {
    int patch = 128;
    std::array<int, 4> channels{8, 8, 16, 16};
    static constexpr int kernel = 3;

    int conv_in_channels(int layer) const { return layer == 0 ? 1 : channels[static_cast<std::size_t>(layer - 1)]; }
    int flat_dim() const { return (patch / 16) * (patch / 16) * channels[3]; }
    int out_dim() const { return patch * patch; }
    std::size_t param_count() const;
    void validate() const;

    bool operator==(const ArchSpec&) const = default;
};

template <class T>
struct ConvParams {
    int in_channels = 0, out_channels = 0;
    std::vector<T> kernel; // [ky][kx][cin][cout], 3x3
    std::vector<T> bias;   // [cout]
};

/// All parameters of one CNN instance.
template <class T>
struct WeightsT {
    ArchSpec arch;
    std::array<ConvParams<T>, 4> conv;
    std::vector<T> dense_w; // [flat_dim][out_dim] row-major
    std::vector<T> dense_b; // [out_dim]
    std::uint64_t init_seed = 0;
};

using ModelWeights = WeightsT<float>;

/// Allocate zeroed parameter containers of the right shapes.
template <class T>
WeightsT<T> make_weights(const ArchSpec& arch);

/// Glorot-uniform initialization (+-sqrt(6/(fan_in+fan_out)) per block,
/// zero biases), seeded and reproducible.
template <class T>
WeightsT<T> init_weights(const ArchSpec& arch, std::uint64_t seed);

/// Visit every parameter block in serialization order:
/// conv1.kernel, conv1.bias, ..., conv4.bias, dense.w, dense.b.
template <class T, class F>
void for_each_block(WeightsT<T>& w, F&& fn) {
    for (int l = 0; l < 4; ++l) {
        std::string name = "conv" + std::to_string(l + 1);
        fn(name + ".kernel", w.conv[static_cast<std::size_t>(l)].kernel);
        fn(name + ".bias", w.conv[static_cast<std::size_t>(l)].bias);
    }
    fn(std::string("dense.w"), w.dense_w);
    fn(std::string("dense.b"), w.dense_b);
}
template <class T, class F>
void for_each_block(const WeightsT<T>& w, F&& fn) {
    for_each_block(const_cast<WeightsT<T>&>(w), [&](const std::string& name, std::vector<T>& v) {
        fn(name, static_cast<const std::vector<T>&>(v));
    });
}

/// FNV-1a over the raw parameter bits in block order; the freeze check.
std::uint64_t weights_hash(const ModelWeights& w);

// --- individual layer operations (exposed for tests and oracles) ---

/// 3x3 convolution, stride 1, zero same-padding.
template <class T>
Tensor4<T> conv2d_forward(const Tensor4<T>& input, const ConvParams<T>& layer);

/// 2x2 average pooling; spatial dims must be even.
template <class T>
Tensor4<T> avgpool2(const Tensor4<T>& input);

template <class T>
Tensor4<T> relu(const Tensor4<T>& input);

/// Numerically stable logistic function.
template <class T>
T sigmoid_scalar(T x);

template <class T>
Tensor4<T> sigmoid(const Tensor4<T>& input);

// --- full network ---

/// Activations retained by forward_cached for the backward pass.
template <class T>
struct ForwardCache {
    std::array<Tensor4<T>, 4> conv_in;  // input of each conv block
    std::array<Tensor4<T>, 4> pool_out; // pre-ReLU pooled activations
    Tensor4<T> features;                // flattened-view source [N, p/16, p/16, c4]
    Tensor4<T> output;                  // sigmoid probabilities [N, patch, patch, 1]
};

/// Forward pass; batch is [N, patch, patch, 1] with values in [0,1].
template <class T>
Tensor4<T> forward(const WeightsT<T>& weights, const Tensor4<T>& batch);

template <class T>
const Tensor4<T>& forward_cached(const WeightsT<T>& weights, const Tensor4<T>& batch, ForwardCache<T>& cache);

/// Mean binary cross-entropy over all elements; predictions are clamped
/// to [1e-7, 1 - 1e-7] before the logs.
template <class T>
double bce(const Tensor4<T>& pred, const Tensor4<T>& label);

/// dL/dpred of bce(); zero where the clamp is active.
template <class T>
Tensor4<T> bce_output_grad(const Tensor4<T>& pred, const Tensor4<T>& label);

/// Gradients of every parameter block, plus optionally the input gradient.
template <class T>
struct Gradients {
    WeightsT<T> params;     // same shapes as the weights
    Tensor4<T> input_grad;  // filled only when requested
    bool has_input_grad = false;
};

/// Exact backpropagation from dL/d(output probabilities).
/// want_params=false skips parameter gradients (frozen networks);
/// want_input=true also returns dL/d(input).
template <class T>
Gradients<T> backward(const WeightsT<T>& weights, const ForwardCache<T>& cache, const Tensor4<T>& output_grad,
                      bool want_params = true, bool want_input = false);

// --- Adam optimizer ---

template <class T>
struct AdamState {
    double lr = 1e-3, beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    long t = 0;
    WeightsT<T> m, v;

    AdamState() = default;
    explicit AdamState(const ArchSpec& arch, double lr_ = 1e-3)
        : lr(lr_), m(make_weights<T>(arch)), v(make_weights<T>(arch)) {}
};

/// One bias-corrected Adam update. Throws OptimizerError (naming the
/// block) on a non-finite gradient.
template <class T>
void adam_step(WeightsT<T>& weights, const Gradients<T>& grads, AdamState<T>& state);

// --- weight files ---

/// Weight file: magic "FABFIXW1", u32-LE manifest length, JSON manifest
/// (architecture, block shapes, seed, metadata), then the raw float32
/// payload in manifest order. Round trips are bit-exact.
void save_weights(const ModelWeights& weights, const std::string& path, const std::string& meta_json = "{}");

struct LoadedWeights {
    ModelWeights weights;
    std::string meta_json;
};
LoadedWeights load_weights(const std::string& path);

} // namespace fabfix
