#include "fabfix/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <thread>

#include <nlohmann/json.hpp>

#include "fabfix/rng.hpp"

namespace fabfix {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<std::size_t> Dataset::indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < split.size(); ++i) {
        if (split[i] == s) out.push_back(i);
    }
    return out;
}

std::size_t Dataset::count(Split s) const {
    std::size_t n = 0;
    for (Split v : split) n += (v == s) ? 1 : 0;
    return n;
}

void TrainConfig::validate() const {
    if (batch_size < 1 || max_epochs < 1 || patience < 1 || dataset_stride < 1 || ensemble_size < 1) {
        throw ParamError("training counts must all be >= 1");
    }
    if (patch_size < 16 || patch_size % 16 != 0) {
        throw ParamError("patch_size must be a positive multiple of 16");
    }
    if (!(lr > 0.0)) throw ParamError("learning rate must be positive");
}

Dataset build_dataset_from_pairs(const std::vector<std::pair<Bitmap, Bitmap>>& pairs, int stride,
                                 int patch_size, std::uint64_t split_seed) {
    if (pairs.empty()) throw ParamError("build_dataset requires a non-empty corpus");
    if (stride < 1) throw ParamError("dataset stride must be >= 1");

    Dataset ds;
    ds.patch_size = patch_size;
    for (const auto& [layout, fabricated] : pairs) {
        if (layout.width != fabricated.width || layout.height != fabricated.height) {
            throw ShapeError("layout and fabricated rasters differ in size");
        }
        if (layout.width < patch_size || layout.height < patch_size) {
            throw ShapeError("pattern " + std::to_string(layout.width) + "x" + std::to_string(layout.height) +
                             " is smaller than the patch size " + std::to_string(patch_size));
        }
        BitPatchSet lp = slice_patches(layout, patch_size, stride);
        BitPatchSet fp = slice_patches(fabricated, patch_size, stride);
        ds.layout.insert(ds.layout.end(), lp.data.begin(), lp.data.end());
        ds.fabricated.insert(ds.fabricated.end(), fp.data.begin(), fp.data.end());
        ds.split.insert(ds.split.end(), lp.count(), Split::Train);
    }

    // Seeded permutation; the first round(0.8 n) entries train.
    const std::size_t n = ds.split.size();
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    std::mt19937_64 rng(split_seed);
    rng_shuffle(perm, rng);
    const std::size_t n_train = static_cast<std::size_t>(std::llround(0.8 * static_cast<double>(n)));
    for (std::size_t i = 0; i < n; ++i) {
        ds.split[perm[i]] = (i < n_train) ? Split::Train : Split::Test;
    }
    return ds;
}

Dataset build_dataset(const std::vector<Bitmap>& corpus, const FabParams& fab, int stride,
                      int patch_size, std::uint64_t split_seed) {
    if (corpus.empty()) throw ParamError("build_dataset requires a non-empty corpus");
    std::vector<std::pair<Bitmap, Bitmap>> pairs;
    pairs.reserve(corpus.size());
    for (const Bitmap& layout : corpus) {
        pairs.emplace_back(layout, fabricate(layout, fab));
    }
    return build_dataset_from_pairs(pairs, stride, patch_size, split_seed);
}

Tensor4<float> gather_batch(const Dataset& dataset, const std::vector<std::size_t>& order,
                            std::size_t first, std::size_t count, bool from_layout) {
    Tensor4<float> batch(static_cast<int>(count), dataset.patch_size, dataset.patch_size, 1);
    const std::size_t pv = dataset.patch_values();
    for (std::size_t b = 0; b < count; ++b) {
        const std::uint8_t* src =
            from_layout ? dataset.layout_patch(order[first + b]) : dataset.fabricated_patch(order[first + b]);
        float* dst = batch.values.data() + b * pv;
        for (std::size_t i = 0; i < pv; ++i) dst[i] = static_cast<float>(src[i]);
    }
    return batch;
}

Tensor4<float> ensemble_mean_forward(const Ensemble& ensemble, const Tensor4<float>& batch) {
    if (ensemble.members.empty()) throw ParamError("ensemble has no members");
    std::vector<double> acc;
    Tensor4<float> out;
    for (const ModelWeights& w : ensemble.members) {
        Tensor4<float> o = forward(w, batch);
        if (acc.empty()) acc.assign(o.size(), 0.0);
        for (std::size_t i = 0; i < o.size(); ++i) acc[i] += static_cast<double>(o.values[i]);
        if (out.size() == 0) out = std::move(o);
    }
    const double inv = 1.0 / static_cast<double>(ensemble.members.size());
    for (std::size_t i = 0; i < acc.size(); ++i) out.values[i] = static_cast<float>(acc[i] * inv);
    return out;
}

namespace {

// Forward through the frozen ensemble with caches retained, returning the
// mean output; used by the tandem loss.
Tensor4<float> frozen_mean_forward(const Ensemble& ens, const Tensor4<float>& input,
                                   std::vector<ForwardCache<float>>& caches) {
    caches.resize(ens.members.size());
    std::vector<double> acc;
    Tensor4<float> mean;
    for (std::size_t e = 0; e < ens.members.size(); ++e) {
        const Tensor4<float>& o = forward_cached(ens.members[e], input, caches[e]);
        if (e == 0) {
            acc.assign(o.size(), 0.0);
            mean = o;
        }
        for (std::size_t i = 0; i < o.size(); ++i) acc[i] += static_cast<double>(o.values[i]);
    }
    const double inv = 1.0 / static_cast<double>(ens.members.size());
    for (std::size_t i = 0; i < acc.size(); ++i) mean.values[i] = static_cast<float>(acc[i] * inv);
    return mean;
}

// dL/d(corrector output): backprop dL/dmean through every frozen member
// (input gradient only) and sum in member order.
Tensor4<float> frozen_input_grad(const Ensemble& ens, const std::vector<ForwardCache<float>>& caches,
                                 const Tensor4<float>& mean_grad) {
    Tensor4<float> member_grad = mean_grad;
    const float inv = 1.0f / static_cast<float>(ens.members.size());
    for (float& v : member_grad.values) v *= inv;

    Tensor4<float> total;
    for (std::size_t e = 0; e < ens.members.size(); ++e) {
        Gradients<float> g = backward(ens.members[e], caches[e], member_grad, /*want_params=*/false,
                                      /*want_input=*/true);
        if (e == 0) {
            total = std::move(g.input_grad);
        } else {
            for (std::size_t i = 0; i < total.size(); ++i) total.values[i] += g.input_grad.values[i];
        }
    }
    return total;
}

struct TrainTask {
    bool inverse_io = false;            // input fabricated, label layout
    const Ensemble* tandem = nullptr;   // frozen forward ensemble, or null
};

double evaluate_loss(const ModelWeights& w, const Dataset& ds, const std::vector<std::size_t>& idx,
                     int batch_size, const TrainTask& task) {
    double sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t pos = 0; pos < idx.size(); pos += static_cast<std::size_t>(batch_size)) {
        const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(batch_size), idx.size() - pos);
        Tensor4<float> x = gather_batch(ds, idx, pos, b, /*from_layout=*/!task.inverse_io);
        double loss;
        if (task.tandem != nullptr) {
            Tensor4<float> correction = forward(w, x);
            Tensor4<float> outcome = ensemble_mean_forward(*task.tandem, correction);
            loss = bce(outcome, x);
        } else {
            Tensor4<float> y = gather_batch(ds, idx, pos, b, /*from_layout=*/task.inverse_io);
            Tensor4<float> p = forward(w, x);
            loss = bce(p, y);
        }
        sum += loss * static_cast<double>(b);
        seen += b;
    }
    return seen > 0 ? sum / static_cast<double>(seen) : 0.0;
}

TrainResult train_core(const Dataset& ds, const TrainConfig& cfg, const TrainTask& task) {
    cfg.validate();
    if (ds.count() == 0) throw ParamError("cannot train on an empty dataset");
    if (task.tandem != nullptr) {
        if (task.tandem->members.empty()) throw ParamError("tandem training requires a pretrained forward ensemble");
        if (task.tandem->role != Ensemble::Role::Forward) {
            throw ParamError("tandem training requires an ensemble with the forward role");
        }
        if (task.tandem->members.front().arch.patch != ds.patch_size) {
            throw ShapeError("forward ensemble patch size does not match the dataset");
        }
    }

    ArchSpec arch;
    arch.patch = ds.patch_size;
    ModelWeights weights = init_weights<float>(arch, cfg.seed);
    AdamState<float> adam(arch, cfg.lr);

    std::vector<std::size_t> train_idx = ds.indices(Split::Train);
    std::vector<std::size_t> test_idx = ds.indices(Split::Test);
    if (train_idx.empty()) throw ParamError("dataset has no training examples");
    // Degenerate datasets without a test split are monitored on the train split.
    const std::vector<std::size_t>& monitor_idx = test_idx.empty() ? train_idx : test_idx;

    std::mt19937_64 shuffle_rng(cfg.seed);

    TrainResult result;
    result.weights = weights;
    result.best_test_bce = std::numeric_limits<double>::infinity();
    int since_best = 0;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        rng_shuffle(train_idx, shuffle_rng);

        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t pos = 0; pos < train_idx.size(); pos += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t b = std::min<std::size_t>(static_cast<std::size_t>(cfg.batch_size),
                                                        train_idx.size() - pos);
            Tensor4<float> x = gather_batch(ds, train_idx, pos, b, /*from_layout=*/!task.inverse_io);

            double loss;
            Gradients<float> grads;
            if (task.tandem != nullptr) {
                ForwardCache<float> cache;
                const Tensor4<float>& correction = forward_cached(weights, x, cache);
                std::vector<ForwardCache<float>> member_caches;
                Tensor4<float> outcome = frozen_mean_forward(*task.tandem, correction, member_caches);
                loss = bce(outcome, x);
                if (!std::isfinite(loss)) {
                    throw TrainingError("training diverged (non-finite loss) at epoch " + std::to_string(epoch));
                }
                Tensor4<float> mean_grad = bce_output_grad(outcome, x);
                Tensor4<float> correction_grad = frozen_input_grad(*task.tandem, member_caches, mean_grad);
                grads = backward(weights, cache, correction_grad);
            } else {
                Tensor4<float> y = gather_batch(ds, train_idx, pos, b, /*from_layout=*/task.inverse_io);
                ForwardCache<float> cache;
                const Tensor4<float>& p = forward_cached(weights, x, cache);
                loss = bce(p, y);
                if (!std::isfinite(loss)) {
                    throw TrainingError("training diverged (non-finite loss) at epoch " + std::to_string(epoch));
                }
                Tensor4<float> output_grad = bce_output_grad(p, y);
                grads = backward(weights, cache, output_grad);
            }
            adam_step(weights, grads, adam);
            loss_sum += loss * static_cast<double>(b);
            seen += b;
        }

        const double train_bce = loss_sum / static_cast<double>(seen);
        const double test_bce = evaluate_loss(weights, ds, monitor_idx, cfg.batch_size, task);
        if (!std::isfinite(test_bce)) {
            throw TrainingError("training diverged (non-finite test loss) at epoch " + std::to_string(epoch));
        }
        result.epochs.push_back({epoch, train_bce, test_bce});

        if (test_bce < result.best_test_bce) {
            result.best_test_bce = test_bce;
            result.best_epoch = epoch;
            result.weights = weights;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    return result;
}

} // namespace

TrainResult train_forward(const Dataset& dataset, const TrainConfig& config) {
    return train_core(dataset, config, TrainTask{/*inverse_io=*/false, nullptr});
}

TrainResult train_inverse_independent(const Dataset& dataset, const TrainConfig& config) {
    return train_core(dataset, config, TrainTask{/*inverse_io=*/true, nullptr});
}

TrainResult train_inverse_tandem(const Dataset& dataset, const Ensemble& forward_ensemble,
                                 const TrainConfig& config) {
    return train_core(dataset, config, TrainTask{/*inverse_io=*/true, &forward_ensemble});
}

EnsembleResult train_ensemble(Regime regime, const Dataset& dataset, const TrainConfig& config,
                              const Ensemble* forward_ensemble) {
    config.validate();
    if (regime == Regime::InverseTandem && forward_ensemble == nullptr) {
        throw ParamError("tandem ensemble training requires a forward ensemble");
    }

    const int size = config.ensemble_size;
    std::vector<TrainResult> results(static_cast<std::size_t>(size));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(size));

    unsigned hw = std::thread::hardware_concurrency();
    if (hw == 0) hw = 1;
    const unsigned n_threads = std::min<unsigned>(config.threads > 0 ? static_cast<unsigned>(config.threads) : hw,
                                                  static_cast<unsigned>(size));

    std::atomic<int> next{0};
    auto worker = [&]() {
        for (;;) {
            const int k = next.fetch_add(1);
            if (k >= size) return;
            try {
                TrainConfig member_cfg = config;
                member_cfg.seed = config.seed + static_cast<std::uint64_t>(k);
                switch (regime) {
                case Regime::Forward:
                    results[static_cast<std::size_t>(k)] = train_forward(dataset, member_cfg);
                    break;
                case Regime::InverseIndependent:
                    results[static_cast<std::size_t>(k)] = train_inverse_independent(dataset, member_cfg);
                    break;
                case Regime::InverseTandem:
                    results[static_cast<std::size_t>(k)] = train_inverse_tandem(dataset, *forward_ensemble, member_cfg);
                    break;
                }
            } catch (...) {
                errors[static_cast<std::size_t>(k)] = std::current_exception();
            }
        }
    };

    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (std::thread& t : pool) t.join();

    for (const std::exception_ptr& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    EnsembleResult out;
    out.ensemble.role = (regime == Regime::Forward) ? Ensemble::Role::Forward : Ensemble::Role::Corrector;
    for (TrainResult& r : results) out.ensemble.members.push_back(r.weights);
    out.members = std::move(results);
    return out;
}

void write_epoch_csv(const std::vector<EpochStats>& stats, const std::string& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    out << "epoch,train_bce,test_bce\n";
    char line[96];
    for (const EpochStats& s : stats) {
        std::snprintf(line, sizeof(line), "%d,%.10g,%.10g\n", s.epoch, s.train_bce, s.test_bce);
        out << line;
    }
}

namespace {

std::string member_file_name(std::size_t k) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "member_%02zu.fabw", k);
    return buf;
}

} // namespace

void save_ensemble(const Ensemble& ensemble, const std::string& dir,
                   const std::vector<std::string>* member_meta_json) {
    if (ensemble.members.empty()) throw ParamError("refusing to save an empty ensemble");
    fs::create_directories(dir);

    json manifest;
    manifest["role"] = ensemble.role == Ensemble::Role::Forward ? "forward" : "corrector";
    manifest["size"] = ensemble.members.size();
    json names = json::array();
    for (std::size_t k = 0; k < ensemble.members.size(); ++k) {
        const std::string name = member_file_name(k);
        const std::string meta =
            (member_meta_json != nullptr && k < member_meta_json->size()) ? (*member_meta_json)[k] : "{}";
        save_weights(ensemble.members[k], (fs::path(dir) / name).string(), meta);
        names.push_back(name);
    }
    manifest["members"] = names;
    std::ofstream out(fs::path(dir) / "ensemble.json", std::ios::trunc);
    if (!out) throw FormatError("cannot write ensemble manifest in '" + dir + "'");
    out << manifest.dump(2) << "\n";
}

Ensemble load_ensemble(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "ensemble.json");
    if (!in) throw FormatError("'" + dir + "' does not contain ensemble.json");
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw FormatError(dir + "/ensemble.json is not valid JSON: " + std::string(e.what()));
    }

    Ensemble ens;
    const std::string role = manifest.value("role", "");
    if (role == "forward") {
        ens.role = Ensemble::Role::Forward;
    } else if (role == "corrector") {
        ens.role = Ensemble::Role::Corrector;
    } else {
        throw FormatError(dir + ": unknown ensemble role '" + role + "'");
    }
    for (const auto& name : manifest.value("members", std::vector<std::string>{})) {
        ens.members.push_back(load_weights((fs::path(dir) / name).string()).weights);
    }
    if (ens.members.empty()) throw FormatError(dir + ": ensemble has no members");
    for (const ModelWeights& m : ens.members) {
        if (!(m.arch == ens.members.front().arch)) {
            throw ShapeError(dir + ": ensemble members disagree on the architecture");
        }
    }
    return ens;
}

} // namespace fabfix
