#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "fabfix/config.hpp"
#include "fabfix/correct.hpp"
#include "fabfix/fabsim.hpp"
#include "fabfix/metrics.hpp"
#include "fabfix/patterns.hpp"
#include "fabfix/pgm.hpp"
#include "fabfix/training.hpp"

namespace py = pybind11;
using namespace fabfix;

namespace {

Bitmap bitmap_from_array(const py::array& arr) {
    py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast> a(arr);
    if (a.ndim() != 2) throw ShapeError("expected a 2-D array");
    Bitmap bm(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
    const std::uint8_t* src = a.data();
    for (std::size_t i = 0; i < bm.values.size(); ++i) bm.values[i] = src[i] ? 1 : 0;
    return bm;
}

py::array_t<std::uint8_t> bitmap_to_array(const Bitmap& bm) {
    py::array_t<std::uint8_t> out({bm.height, bm.width});
    std::copy(bm.values.begin(), bm.values.end(), out.mutable_data());
    return out;
}

py::array_t<float> field_to_array(const Field& f) {
    py::array_t<float> out({f.height, f.width});
    std::copy(f.values.begin(), f.values.end(), out.mutable_data());
    return out;
}

FabParams fab_params(double sigma, double threshold, double edge_noise_amp, std::uint64_t seed) {
    FabParams p;
    p.sigma = sigma;
    p.threshold = threshold;
    p.edge_noise_amp = edge_noise_amp;
    p.seed = seed;
    p.validate();
    return p;
}

TrainConfig train_config(int batch_size, int max_epochs, int patience, std::uint64_t seed, int ensemble_size,
                         int patch_size, double lr, int threads) {
    TrainConfig cfg;
    cfg.batch_size = batch_size;
    cfg.max_epochs = max_epochs;
    cfg.patience = patience;
    cfg.seed = seed;
    cfg.ensemble_size = ensemble_size;
    cfg.patch_size = patch_size;
    cfg.lr = lr;
    cfg.threads = threads;
    cfg.validate();
    return cfg;
}

InferenceParams inference_params(int stride, double threshold, int batch_size, int threads) {
    InferenceParams p;
    p.stride = stride;
    p.binarize_threshold = threshold;
    p.batch_size = batch_size;
    p.threads = threads;
    return p;
}

} // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "virtual-fabrication modeling and CNN-based layout correction";

    py::register_exception<Error>(m, "FabfixError", PyExc_RuntimeError);

    m.def(
        "rasterize",
        [](const std::vector<std::tuple<int, int, int, int>>& rects, int width, int height) {
            std::vector<Rect> rs;
            rs.reserve(rects.size());
            for (const auto& [x0, y0, x1, y1] : rects) rs.push_back({x0, y0, x1, y1});
            return bitmap_to_array(rasterize(rs, width, height));
        },
        py::arg("rectangles"), py::arg("width"), py::arg("height"),
        "Paint (x0, y0, x1, y1) rectangles onto a blank canvas (pixel-center rule).");

    m.def(
        "generate_pattern",
        [](int width, int height, std::pair<int, int> n_shapes, std::pair<int, int> feature_size_range,
           std::uint64_t seed, std::optional<std::vector<double>> shape_mix) {
            PatternSpec spec;
            spec.width = width;
            spec.height = height;
            spec.min_shapes = n_shapes.first;
            spec.max_shapes = n_shapes.second;
            spec.min_feature = feature_size_range.first;
            spec.max_feature = feature_size_range.second;
            spec.seed = seed;
            if (shape_mix) {
                if (shape_mix->size() != kShapeKinds) throw ParamError("shape_mix needs 7 weights");
                std::copy(shape_mix->begin(), shape_mix->end(), spec.shape_mix.begin());
            }
            return bitmap_to_array(generate_pattern(spec));
        },
        py::arg("width"), py::arg("height"), py::arg("n_shapes") = std::pair<int, int>{20, 60},
        py::arg("feature_size_range") = std::pair<int, int>{8, 384}, py::arg("seed") = 1,
        py::arg("shape_mix") = std::nullopt, "Seeded random training layout.");

    m.def(
        "fabricate",
        [](const py::array& layout, double sigma, double threshold, double edge_noise_amp, std::uint64_t seed) {
            return bitmap_to_array(fabricate(bitmap_from_array(layout), fab_params(sigma, threshold, edge_noise_amp, seed)));
        },
        py::arg("layout"), py::arg("sigma") = 3.0, py::arg("threshold") = 0.5, py::arg("edge_noise_amp") = 0.0,
        py::arg("seed") = 0, "Virtual fabrication oracle: blur, noise, threshold.");

    m.def(
        "fabricate_field",
        [](const py::array& layout, double sigma, double threshold, double edge_noise_amp, std::uint64_t seed) {
            return field_to_array(fabricate_field(bitmap_from_array(layout), fab_params(sigma, threshold, edge_noise_amp, seed)));
        },
        py::arg("layout"), py::arg("sigma") = 3.0, py::arg("threshold") = 0.5, py::arg("edge_noise_amp") = 0.0,
        py::arg("seed") = 0, "Pre-threshold fabrication field in [0,1].");

    m.def(
        "error_pixels",
        [](const py::array& a, const py::array& b) { return error_pixels(bitmap_from_array(a), bitmap_from_array(b)); },
        py::arg("a"), py::arg("b"), "Hamming distance between two binary rasters.");

    m.def(
        "diff_map",
        [](const py::array& nominal, const py::array& other) {
            DiffMap map = diff_map(bitmap_from_array(nominal), bitmap_from_array(other));
            py::array_t<std::uint8_t> out({map.height, map.width});
            std::uint8_t* dst = out.mutable_data();
            for (std::size_t i = 0; i < map.codes.size(); ++i) dst[i] = static_cast<std::uint8_t>(map.codes[i]);
            return out;
        },
        py::arg("nominal"), py::arg("other"), "Per-pixel codes: 0 unchanged, 1 loss, 2 gain.");

    m.def(
        "reduction_factor",
        [](long long e_uncorrected, long long e_corrected) {
            ReductionFactor r = reduction_factor(e_uncorrected, e_corrected);
            return py::make_tuple(r.ratio, r.display());
        },
        py::arg("e_uncorrected"), py::arg("e_corrected"), "(exact ratio, one-decimal display).");

    m.def("read_pgm", [](const std::string& path) { return bitmap_to_array(read_pgm(path)); }, py::arg("path"));
    m.def("read_pgm_field", [](const std::string& path) { return field_to_array(read_pgm_field(path)); },
          py::arg("path"));
    m.def(
        "write_pgm",
        [](const py::array& image, const std::string& path) {
            if (image.dtype().kind() == 'f') {
                py::array_t<float, py::array::c_style | py::array::forcecast> a(image);
                if (a.ndim() != 2) throw ShapeError("expected a 2-D array");
                Field f(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
                std::copy(a.data(), a.data() + f.values.size(), f.values.begin());
                write_pgm(f, path);
            } else {
                write_pgm(bitmap_from_array(image), path);
            }
        },
        py::arg("image"), py::arg("path"), "Write a binary (P5) PGM; float arrays are scaled to maxval 255.");

    py::class_<Dataset>(m, "Dataset")
        .def_static(
            "build",
            [](const std::vector<py::array>& layouts, double sigma, double threshold, double edge_noise_amp,
               std::uint64_t fab_seed, int stride, int patch_size, std::uint64_t split_seed) {
                std::vector<Bitmap> corpus;
                corpus.reserve(layouts.size());
                for (const py::array& a : layouts) corpus.push_back(bitmap_from_array(a));
                return build_dataset(corpus, fab_params(sigma, threshold, edge_noise_amp, fab_seed), stride,
                                     patch_size, split_seed);
            },
            py::arg("layouts"), py::arg("sigma") = 3.0, py::arg("threshold") = 0.5, py::arg("edge_noise_amp") = 0.0,
            py::arg("fab_seed") = 0, py::arg("stride") = 32, py::arg("patch_size") = 128, py::arg("split_seed") = 1,
            "Fabricate each layout with the oracle and co-slice into patch pairs.")
        .def_property_readonly("patch_size", [](const Dataset& d) { return d.patch_size; })
        .def("__len__", [](const Dataset& d) { return d.count(); })
        .def_property_readonly("train_count", [](const Dataset& d) { return d.count(Split::Train); })
        .def_property_readonly("test_count", [](const Dataset& d) { return d.count(Split::Test); });

    py::class_<Ensemble>(m, "Ensemble")
        .def_property_readonly("role",
                               [](const Ensemble& e) {
                                   return e.role == Ensemble::Role::Forward ? "forward" : "corrector";
                               })
        .def("__len__", [](const Ensemble& e) { return e.members.size(); })
        .def("save", [](const Ensemble& e, const std::string& dir) { save_ensemble(e, dir); }, py::arg("dir"))
        .def_static("load", [](const std::string& dir) { return load_ensemble(dir); }, py::arg("dir"));

    m.def(
        "train_forward_ensemble",
        [](const Dataset& ds, int batch_size, int max_epochs, int patience, std::uint64_t seed, int ensemble_size,
           double lr, int threads) {
            TrainConfig cfg = train_config(batch_size, max_epochs, patience, seed, ensemble_size, ds.patch_size, lr, threads);
            return train_ensemble(Regime::Forward, ds, cfg).ensemble;
        },
        py::arg("dataset"), py::arg("batch_size") = 32, py::arg("max_epochs") = 100, py::arg("patience") = 10,
        py::arg("seed") = 1, py::arg("ensemble_size") = 10, py::arg("lr") = 1e-3, py::arg("threads") = 0,
        py::call_guard<py::gil_scoped_release>(), "Train the forward predictor ensemble.");

    m.def(
        "train_corrector_ensemble",
        [](const Dataset& ds, const std::string& mode, const Ensemble* forward, int batch_size, int max_epochs,
           int patience, std::uint64_t seed, int ensemble_size, double lr, int threads) {
            TrainConfig cfg = train_config(batch_size, max_epochs, patience, seed, ensemble_size, ds.patch_size, lr, threads);
            if (mode == "tandem") {
                if (forward == nullptr) throw ParamError("tandem mode requires forward=...");
                return train_ensemble(Regime::InverseTandem, ds, cfg, forward).ensemble;
            }
            if (mode == "independent") return train_ensemble(Regime::InverseIndependent, ds, cfg).ensemble;
            throw ParamError("mode must be 'tandem' or 'independent'");
        },
        py::arg("dataset"), py::arg("mode") = "tandem", py::arg("forward") = nullptr, py::arg("batch_size") = 32,
        py::arg("max_epochs") = 100, py::arg("patience") = 10, py::arg("seed") = 1, py::arg("ensemble_size") = 10,
        py::arg("lr") = 1e-3, py::arg("threads") = 0, py::call_guard<py::gil_scoped_release>(),
        "Train the inverse corrector ensemble (tandem or independent).");

    m.def(
        "evaluate_bce",
        [](const Ensemble& ens, const Dataset& ds, const std::string& split, const std::string& direction) {
            Split s = split == "train" ? Split::Train : Split::Test;
            Direction d = direction == "inverse" ? Direction::Inverse : Direction::Forward;
            return evaluate_bce(ens, ds, s, d);
        },
        py::arg("ensemble"), py::arg("dataset"), py::arg("split") = "test", py::arg("direction") = "forward",
        py::call_guard<py::gil_scoped_release>(), "Mean BCE of ensemble-mean outputs over a split.");

    m.def(
        "predict",
        [](const py::array& layout, const Ensemble& forward, int stride, double threshold, int batch_size,
           int threads) {
            Field f = infer_full(bitmap_from_array(layout), forward,
                                 inference_params(stride, threshold, batch_size, threads), Ensemble::Role::Forward);
            return py::make_tuple(bitmap_to_array(binarize(f, threshold)), field_to_array(f));
        },
        py::arg("layout"), py::arg("forward"), py::arg("stride") = 4, py::arg("threshold") = 0.5,
        py::arg("batch_size") = 32, py::arg("threads") = 0,
        "Sliding-window outcome prediction: (binary bitmap, raw field).");

    m.def(
        "correct",
        [](const py::array& nominal, const Ensemble& corrector, int stride, double threshold, int batch_size,
           int threads) {
            Correction c = correct_layout(bitmap_from_array(nominal), corrector,
                                          inference_params(stride, threshold, batch_size, threads));
            return py::make_tuple(bitmap_to_array(c.correction), field_to_array(c.field));
        },
        py::arg("nominal"), py::arg("corrector"), py::arg("stride") = 4, py::arg("threshold") = 0.5,
        py::arg("batch_size") = 32, py::arg("threads") = 0,
        "Sliding-window layout correction: (binary bitmap, raw field).");

    m.def(
        "uncertainty_mask",
        [](const py::array& field, double lo, double hi) {
            py::array_t<float, py::array::c_style | py::array::forcecast> a(field);
            if (a.ndim() != 2) throw ShapeError("expected a 2-D array");
            Field f(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
            std::copy(a.data(), a.data() + f.values.size(), f.values.begin());
            return bitmap_to_array(uncertainty_mask(f, lo, hi));
        },
        py::arg("field"), py::arg("lo") = 0.1, py::arg("hi") = 0.9,
        "Pixels whose value lies strictly inside the uncertainty band.");

    m.attr("__version__") = "0.1.0";
}
