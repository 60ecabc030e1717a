#include "fabfix/neural.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "fabfix/rng.hpp"

namespace fabfix {

namespace {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

constexpr double kBceClamp = 1e-7;

// Unrolls 3x3 same-padded neighborhoods into a (N*H*W) x (9*C) matrix so a
// convolution becomes one GEMM against the [ky][kx][cin][cout] kernel.
template <class T>
void im2col(const Tensor4<T>& in, std::vector<T>& m) {
    const int N = in.n, H = in.h, W = in.w, C = in.c;
    const std::size_t cols = 9u * static_cast<std::size_t>(C);
    m.assign(static_cast<std::size_t>(N) * H * W * cols, T{});
    for (int n = 0; n < N; ++n) {
        for (int y = 0; y < H; ++y) {
            for (int ky = 0; ky < 3; ++ky) {
                const int sy = y + ky - 1;
                if (sy < 0 || sy >= H) continue;
                for (int kx = 0; kx < 3; ++kx) {
                    const int x0 = std::max(0, 1 - kx);
                    const int x1 = std::min(W, W + 1 - kx);
                    if (x0 >= x1) continue;
                    const T* src = &in.values[((static_cast<std::size_t>(n) * H + sy) * W + (x0 + kx - 1)) * C];
                    T* dst = &m[((static_cast<std::size_t>(n) * H + y) * W + x0) * cols +
                                static_cast<std::size_t>(ky * 3 + kx) * C];
                    for (int x = x0; x < x1; ++x) {
                        for (int c = 0; c < C; ++c) dst[c] = src[c];
                        src += C;
                        dst += cols;
                    }
                }
            }
        }
    }
}

// Scatter-add transpose of im2col.
template <class T>
void col2im_add(const std::vector<T>& m, Tensor4<T>& din) {
    const int N = din.n, H = din.h, W = din.w, C = din.c;
    const std::size_t cols = 9u * static_cast<std::size_t>(C);
    for (int n = 0; n < N; ++n) {
        for (int y = 0; y < H; ++y) {
            for (int ky = 0; ky < 3; ++ky) {
                const int sy = y + ky - 1;
                if (sy < 0 || sy >= H) continue;
                for (int kx = 0; kx < 3; ++kx) {
                    const int x0 = std::max(0, 1 - kx);
                    const int x1 = std::min(W, W + 1 - kx);
                    if (x0 >= x1) continue;
                    T* dst = &din.values[((static_cast<std::size_t>(n) * H + sy) * W + (x0 + kx - 1)) * C];
                    const T* src = &m[((static_cast<std::size_t>(n) * H + y) * W + x0) * cols +
                                      static_cast<std::size_t>(ky * 3 + kx) * C];
                    for (int x = x0; x < x1; ++x) {
                        for (int c = 0; c < C; ++c) dst[c] += src[c];
                        dst += C;
                        src += cols;
                    }
                }
            }
        }
    }
}

template <class T>
void check_conv_shapes(const Tensor4<T>& input, const ConvParams<T>& layer) {
    if (input.c != layer.in_channels) {
        throw ShapeError("conv2d: input " + input.shape_str() + " does not match kernel with " +
                         std::to_string(layer.in_channels) + " input channels");
    }
    if (layer.kernel.size() != static_cast<std::size_t>(9) * layer.in_channels * layer.out_channels ||
        layer.bias.size() != static_cast<std::size_t>(layer.out_channels)) {
        throw ShapeError("conv2d: kernel/bias storage does not match declared channels");
    }
}

} // namespace

void ArchSpec::validate() const {
    if (patch < 16 || patch % 16 != 0) {
        throw ParamError("arch patch must be a positive multiple of 16, got " + std::to_string(patch));
    }
    for (int c : channels) {
        if (c < 1) throw ParamError("arch channel sizes must be >= 1");
    }
}

std::size_t ArchSpec::param_count() const {
    std::size_t total = 0;
    for (int l = 0; l < 4; ++l) {
        total += static_cast<std::size_t>(9) * conv_in_channels(l) * channels[static_cast<std::size_t>(l)] +
                 static_cast<std::size_t>(channels[static_cast<std::size_t>(l)]);
    }
    total += static_cast<std::size_t>(flat_dim()) * out_dim() + static_cast<std::size_t>(out_dim());
    return total;
}

template <class T>
WeightsT<T> make_weights(const ArchSpec& arch) {
    arch.validate();
    WeightsT<T> w;
    w.arch = arch;
    for (int l = 0; l < 4; ++l) {
        ConvParams<T>& c = w.conv[static_cast<std::size_t>(l)];
        c.in_channels = arch.conv_in_channels(l);
        c.out_channels = arch.channels[static_cast<std::size_t>(l)];
        c.kernel.assign(static_cast<std::size_t>(9) * c.in_channels * c.out_channels, T{});
        c.bias.assign(static_cast<std::size_t>(c.out_channels), T{});
    }
    w.dense_w.assign(static_cast<std::size_t>(arch.flat_dim()) * arch.out_dim(), T{});
    w.dense_b.assign(static_cast<std::size_t>(arch.out_dim()), T{});

    std::size_t total = 0;
    for_each_block(w, [&](const std::string&, const std::vector<T>& v) { total += v.size(); });
    if (total != arch.param_count()) throw InternalError("parameter count mismatch at construction");
    return w;
}

template <class T>
WeightsT<T> init_weights(const ArchSpec& arch, std::uint64_t seed) {
    WeightsT<T> w = make_weights<T>(arch);
    w.init_seed = seed;
    std::mt19937_64 rng(seed);
    for (int l = 0; l < 4; ++l) {
        ConvParams<T>& c = w.conv[static_cast<std::size_t>(l)];
        const double fan_in = 9.0 * c.in_channels;
        const double fan_out = 9.0 * c.out_channels;
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        for (T& v : c.kernel) v = static_cast<T>(rng_range(rng, -limit, limit));
    }
    const double limit = std::sqrt(6.0 / (static_cast<double>(arch.flat_dim()) + arch.out_dim()));
    for (T& v : w.dense_w) v = static_cast<T>(rng_range(rng, -limit, limit));
    return w;
}

std::uint64_t weights_hash(const ModelWeights& w) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto feed = [&h](const void* data, std::size_t bytes) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < bytes; ++i) {
            h ^= p[i];
            h *= 0x100000001b3ULL;
        }
    };
    for_each_block(w, [&](const std::string&, const std::vector<float>& v) {
        feed(v.data(), v.size() * sizeof(float));
    });
    return h;
}

template <class T>
Tensor4<T> conv2d_forward(const Tensor4<T>& input, const ConvParams<T>& layer) {
    check_conv_shapes(input, layer);
    const std::size_t rows = static_cast<std::size_t>(input.n) * input.h * input.w;
    const std::size_t cols = 9u * static_cast<std::size_t>(input.c);

    std::vector<T> m;
    im2col(input, m);

    Tensor4<T> out(input.n, input.h, input.w, layer.out_channels);
    Eigen::Map<const RowMat<T>> mm(m.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    Eigen::Map<const RowMat<T>> km(layer.kernel.data(), static_cast<Eigen::Index>(cols), layer.out_channels);
    Eigen::Map<RowMat<T>> om(out.values.data(), static_cast<Eigen::Index>(rows), layer.out_channels);
    om.noalias() = mm * km;
    om.rowwise() += Eigen::Map<const RowVec<T>>(layer.bias.data(), layer.out_channels);
    return out;
}

template <class T>
Tensor4<T> avgpool2(const Tensor4<T>& input) {
    if (input.h % 2 != 0 || input.w % 2 != 0) {
        throw ShapeError("avgpool2 requires even spatial dims, got " + input.shape_str());
    }
    Tensor4<T> out(input.n, input.h / 2, input.w / 2, input.c);
    const int C = input.c;
    for (int n = 0; n < input.n; ++n) {
        for (int y = 0; y < out.h; ++y) {
            const T* r0 = &input.values[((static_cast<std::size_t>(n) * input.h + 2 * y) * input.w) * C];
            const T* r1 = r0 + static_cast<std::size_t>(input.w) * C;
            T* dst = &out.values[((static_cast<std::size_t>(n) * out.h + y) * out.w) * C];
            for (int x = 0; x < out.w; ++x) {
                const T* a = r0 + static_cast<std::size_t>(2 * x) * C;
                const T* b = a + C;
                const T* c0 = r1 + static_cast<std::size_t>(2 * x) * C;
                const T* d = c0 + C;
                for (int c = 0; c < C; ++c) {
                    dst[static_cast<std::size_t>(x) * C + c] =
                        (a[c] + b[c] + c0[c] + d[c]) * static_cast<T>(0.25);
                }
            }
        }
    }
    return out;
}

template <class T>
Tensor4<T> relu(const Tensor4<T>& input) {
    Tensor4<T> out = input;
    for (T& v : out.values) v = v > T{} ? v : T{};
    return out;
}

template <class T>
T sigmoid_scalar(T x) {
    if (x >= T{}) {
        T e = std::exp(-x);
        return T{1} / (T{1} + e);
    }
    T e = std::exp(x);
    return e / (T{1} + e);
}

template <class T>
Tensor4<T> sigmoid(const Tensor4<T>& input) {
    Tensor4<T> out = input;
    for (T& v : out.values) v = sigmoid_scalar(v);
    return out;
}

template <class T>
const Tensor4<T>& forward_cached(const WeightsT<T>& weights, const Tensor4<T>& batch, ForwardCache<T>& cache) {
    const ArchSpec& arch = weights.arch;
    if (batch.h != arch.patch || batch.w != arch.patch || batch.c != 1) {
        throw ShapeError("forward: batch " + batch.shape_str() + " does not match arch patch " +
                         std::to_string(arch.patch) + "x" + std::to_string(arch.patch) + "x1");
    }

    cache.conv_in[0] = batch;
    for (int l = 0; l < 4; ++l) {
        Tensor4<T> z = conv2d_forward(cache.conv_in[static_cast<std::size_t>(l)], weights.conv[static_cast<std::size_t>(l)]);
        cache.pool_out[static_cast<std::size_t>(l)] = avgpool2(z);
        Tensor4<T> r = relu(cache.pool_out[static_cast<std::size_t>(l)]);
        if (l < 3) {
            cache.conv_in[static_cast<std::size_t>(l + 1)] = std::move(r);
        } else {
            cache.features = std::move(r);
        }
    }

    const int N = batch.n;
    const int F = arch.flat_dim();
    const int O = arch.out_dim();
    if (cache.features.size() != static_cast<std::size_t>(N) * F) {
        throw InternalError("forward: feature size does not match dense input");
    }

    cache.output = Tensor4<T>(N, arch.patch, arch.patch, 1);
    Eigen::Map<const RowMat<T>> flat(cache.features.values.data(), N, F);
    Eigen::Map<const RowMat<T>> wm(weights.dense_w.data(), F, O);
    Eigen::Map<RowMat<T>> om(cache.output.values.data(), N, O);
    om.noalias() = flat * wm;
    om.rowwise() += Eigen::Map<const RowVec<T>>(weights.dense_b.data(), O);
    for (T& v : cache.output.values) v = sigmoid_scalar(v);
    return cache.output;
}

template <class T>
Tensor4<T> forward(const WeightsT<T>& weights, const Tensor4<T>& batch) {
    ForwardCache<T> cache;
    forward_cached(weights, batch, cache);
    return std::move(cache.output);
}

template <class T>
double bce(const Tensor4<T>& pred, const Tensor4<T>& label) {
    if (!pred.same_shape(label)) {
        throw ShapeError("bce: prediction " + pred.shape_str() + " vs label " + label.shape_str());
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.values.size(); ++i) {
        double p = std::clamp(static_cast<double>(pred.values[i]), kBceClamp, 1.0 - kBceClamp);
        double y = static_cast<double>(label.values[i]);
        sum -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
    }
    return sum / static_cast<double>(pred.values.size());
}

template <class T>
Tensor4<T> bce_output_grad(const Tensor4<T>& pred, const Tensor4<T>& label) {
    if (!pred.same_shape(label)) {
        throw ShapeError("bce_output_grad: prediction " + pred.shape_str() + " vs label " + label.shape_str());
    }
    Tensor4<T> g(pred.n, pred.h, pred.w, pred.c);
    const double inv_total = 1.0 / static_cast<double>(pred.values.size());
    for (std::size_t i = 0; i < pred.values.size(); ++i) {
        double p = static_cast<double>(pred.values[i]);
        if (p <= kBceClamp || p >= 1.0 - kBceClamp) {
            g.values[i] = T{}; // clamp active: loss locally constant in p
            continue;
        }
        double y = static_cast<double>(label.values[i]);
        g.values[i] = static_cast<T>((p - y) / (p * (1.0 - p)) * inv_total);
    }
    return g;
}

template <class T>
Gradients<T> backward(const WeightsT<T>& weights, const ForwardCache<T>& cache, const Tensor4<T>& output_grad,
                      bool want_params, bool want_input) {
    const ArchSpec& arch = weights.arch;
    if (!output_grad.same_shape(cache.output)) {
        throw ShapeError("backward: output grad " + output_grad.shape_str() + " vs output " +
                         cache.output.shape_str());
    }

    Gradients<T> g;
    if (want_params) g.params = make_weights<T>(arch);

    const int N = cache.output.n;
    const int F = arch.flat_dim();
    const int O = arch.out_dim();

    // sigmoid + dense
    std::vector<T> dz(static_cast<std::size_t>(N) * O);
    for (std::size_t i = 0; i < dz.size(); ++i) {
        const T p = cache.output.values[i];
        dz[i] = output_grad.values[i] * p * (T{1} - p);
    }
    Eigen::Map<const RowMat<T>> dzm(dz.data(), N, O);
    Eigen::Map<const RowMat<T>> flat(cache.features.values.data(), N, F);
    Eigen::Map<const RowMat<T>> wm(weights.dense_w.data(), F, O);
    if (want_params) {
        Eigen::Map<RowMat<T>> dwm(g.params.dense_w.data(), F, O);
        dwm.noalias() = flat.transpose() * dzm;
        Eigen::Map<RowVec<T>>(g.params.dense_b.data(), O) = dzm.colwise().sum();
    }

    // gradient at the last ReLU output, shaped like the feature tensor
    Tensor4<T> dcur(N, cache.features.h, cache.features.w, cache.features.c);
    {
        Eigen::Map<RowMat<T>> dflat(dcur.values.data(), N, F);
        dflat.noalias() = dzm * wm.transpose();
    }

    for (int l = 3; l >= 0; --l) {
        const Tensor4<T>& pre_relu = cache.pool_out[static_cast<std::size_t>(l)];
        // ReLU backward
        for (std::size_t i = 0; i < dcur.values.size(); ++i) {
            if (!(pre_relu.values[i] > T{})) dcur.values[i] = T{};
        }
        // average-pool backward: spread each gradient over its 2x2 window
        Tensor4<T> dconv(dcur.n, dcur.h * 2, dcur.w * 2, dcur.c);
        const int C = dcur.c;
        for (int n = 0; n < dcur.n; ++n) {
            for (int y = 0; y < dcur.h; ++y) {
                const T* src = &dcur.values[((static_cast<std::size_t>(n) * dcur.h + y) * dcur.w) * C];
                T* r0 = &dconv.values[((static_cast<std::size_t>(n) * dconv.h + 2 * y) * dconv.w) * C];
                T* r1 = r0 + static_cast<std::size_t>(dconv.w) * C;
                for (int x = 0; x < dcur.w; ++x) {
                    for (int c = 0; c < C; ++c) {
                        const T v = src[static_cast<std::size_t>(x) * C + c] * static_cast<T>(0.25);
                        r0[static_cast<std::size_t>(2 * x) * C + c] = v;
                        r0[static_cast<std::size_t>(2 * x + 1) * C + c] = v;
                        r1[static_cast<std::size_t>(2 * x) * C + c] = v;
                        r1[static_cast<std::size_t>(2 * x + 1) * C + c] = v;
                    }
                }
            }
        }
        // conv backward
        const Tensor4<T>& cin = cache.conv_in[static_cast<std::size_t>(l)];
        const ConvParams<T>& layer = weights.conv[static_cast<std::size_t>(l)];
        const std::size_t rows = static_cast<std::size_t>(cin.n) * cin.h * cin.w;
        const std::size_t cols = 9u * static_cast<std::size_t>(cin.c);
        Eigen::Map<const RowMat<T>> doutm(dconv.values.data(), static_cast<Eigen::Index>(rows), layer.out_channels);
        if (want_params) {
            std::vector<T> m;
            im2col(cin, m);
            Eigen::Map<const RowMat<T>> mm(m.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
            ConvParams<T>& cg = g.params.conv[static_cast<std::size_t>(l)];
            Eigen::Map<RowMat<T>> dkm(cg.kernel.data(), static_cast<Eigen::Index>(cols), layer.out_channels);
            dkm.noalias() = mm.transpose() * doutm;
            Eigen::Map<RowVec<T>>(cg.bias.data(), layer.out_channels) = doutm.colwise().sum();
        }
        if (l > 0 || want_input) {
            std::vector<T> dm(rows * cols);
            Eigen::Map<const RowMat<T>> km(layer.kernel.data(), static_cast<Eigen::Index>(cols), layer.out_channels);
            Eigen::Map<RowMat<T>> dmm(dm.data(), static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
            dmm.noalias() = doutm * km.transpose();
            Tensor4<T> din(cin.n, cin.h, cin.w, cin.c);
            col2im_add(dm, din);
            dcur = std::move(din);
        }
    }

    if (want_input) {
        g.input_grad = std::move(dcur);
        g.has_input_grad = true;
    }
    return g;
}

template <class T>
void adam_step(WeightsT<T>& weights, const Gradients<T>& grads, AdamState<T>& state) {
    std::vector<std::pair<std::string, std::vector<T>*>> wb, mb, vb;
    std::vector<std::pair<std::string, const std::vector<T>*>> gb;
    for_each_block(weights, [&](const std::string& n, std::vector<T>& v) { wb.emplace_back(n, &v); });
    for_each_block(state.m, [&](const std::string& n, std::vector<T>& v) { mb.emplace_back(n, &v); });
    for_each_block(state.v, [&](const std::string& n, std::vector<T>& v) { vb.emplace_back(n, &v); });
    for_each_block(grads.params, [&](const std::string& n, const std::vector<T>& v) { gb.emplace_back(n, &v); });

    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));

    for (std::size_t b = 0; b < wb.size(); ++b) {
        std::vector<T>& w = *wb[b].second;
        std::vector<T>& m = *mb[b].second;
        std::vector<T>& v = *vb[b].second;
        const std::vector<T>& gr = *gb[b].second;
        if (w.size() != gr.size()) {
            throw ShapeError("adam_step: gradient block '" + wb[b].first + "' has mismatched size");
        }
        const T b1 = static_cast<T>(state.beta1), b2 = static_cast<T>(state.beta2);
        for (std::size_t i = 0; i < w.size(); ++i) {
            const T gi = gr[i];
            if (!std::isfinite(static_cast<double>(gi))) {
                throw OptimizerError("non-finite gradient in block '" + wb[b].first + "'");
            }
            m[i] = b1 * m[i] + (T{1} - b1) * gi;
            v[i] = b2 * v[i] + (T{1} - b2) * gi * gi;
            const double mhat = static_cast<double>(m[i]) / bc1;
            const double vhat = static_cast<double>(v[i]) / bc2;
            w[i] -= static_cast<T>(state.lr * mhat / (std::sqrt(vhat) + state.eps));
        }
    }
}

// explicit instantiations: 32-bit for training/inference, 64-bit for gradient checks
#define FABFIX_INSTANTIATE(T)                                                                              \
    template WeightsT<T> make_weights<T>(const ArchSpec&);                                                 \
    template WeightsT<T> init_weights<T>(const ArchSpec&, std::uint64_t);                                  \
    template Tensor4<T> conv2d_forward<T>(const Tensor4<T>&, const ConvParams<T>&);                        \
    template Tensor4<T> avgpool2<T>(const Tensor4<T>&);                                                    \
    template Tensor4<T> relu<T>(const Tensor4<T>&);                                                        \
    template T sigmoid_scalar<T>(T);                                                                       \
    template Tensor4<T> sigmoid<T>(const Tensor4<T>&);                                                     \
    template const Tensor4<T>& forward_cached<T>(const WeightsT<T>&, const Tensor4<T>&, ForwardCache<T>&); \
    template Tensor4<T> forward<T>(const WeightsT<T>&, const Tensor4<T>&);                                 \
    template double bce<T>(const Tensor4<T>&, const Tensor4<T>&);                                          \
    template Tensor4<T> bce_output_grad<T>(const Tensor4<T>&, const Tensor4<T>&);                          \
    template Gradients<T> backward<T>(const WeightsT<T>&, const ForwardCache<T>&, const Tensor4<T>&, bool, bool); \
    template void adam_step<T>(WeightsT<T>&, const Gradients<T>&, AdamState<T>&);

FABFIX_INSTANTIATE(float)
FABFIX_INSTANTIATE(double)
#undef FABFIX_INSTANTIATE

} // namespace fabfix
