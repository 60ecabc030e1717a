#include "fabfix/config.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace fabfix {

using nlohmann::json;

namespace {

const char* kShapeNames[kShapeKinds] = {"rectangle", "bar", "cross", "star", "disk", "ring", "blob"};

void reject_unknown(const json& j, std::initializer_list<const char*> known, const std::string& where) {
    for (const auto& [key, _] : j.items()) {
        bool ok = false;
        for (const char* k : known) {
            if (key == k) {
                ok = true;
                break;
            }
        }
        if (!ok) throw FormatError("config: unknown key '" + key + "' in " + where);
    }
}

template <class T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

} // namespace

void RunConfig::validate() const {
    pattern.validate();
    if (n_patterns < 1) throw ParamError("n_patterns must be >= 1");
    fab.validate();
    if (fab_runs < 1) throw ParamError("fab_runs must be >= 1");
    train.validate();
    inference.validate(train.patch_size);
    if (!(nm_per_pixel > 0.0)) throw ParamError("nm_per_pixel must be positive");
    if (data_dir.empty() || model_dir.empty() || out_dir.empty()) {
        throw ParamError("config paths must not be empty");
    }
}

RunConfig default_config() { return RunConfig{}; }

RunConfig parse_config(const std::string& json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("config is not valid JSON: ") + e.what());
    }

    RunConfig cfg;
    reject_unknown(j, {"pattern", "n_patterns", "fab", "fab_runs", "train", "inference", "paths", "nm_per_pixel"},
                   "top level");
    try {
        if (j.contains("pattern")) {
            const json& p = j.at("pattern");
            reject_unknown(p, {"width", "height", "n_shapes", "shape_mix", "feature_size_range", "seed"}, "pattern");
            maybe(p, "width", cfg.pattern.width);
            maybe(p, "height", cfg.pattern.height);
            if (p.contains("n_shapes")) {
                auto r = p.at("n_shapes").get<std::vector<int>>();
                if (r.size() != 2) throw FormatError("config: pattern.n_shapes must be [min, max]");
                cfg.pattern.min_shapes = r[0];
                cfg.pattern.max_shapes = r[1];
            }
            if (p.contains("shape_mix")) {
                const json& m = p.at("shape_mix");
                reject_unknown(m, {"rectangle", "bar", "cross", "star", "disk", "ring", "blob"}, "pattern.shape_mix");
                for (int k = 0; k < kShapeKinds; ++k) {
                    if (m.contains(kShapeNames[k])) {
                        cfg.pattern.shape_mix[static_cast<std::size_t>(k)] = m.at(kShapeNames[k]).get<double>();
                    }
                }
            }
            if (p.contains("feature_size_range")) {
                auto r = p.at("feature_size_range").get<std::vector<int>>();
                if (r.size() != 2) throw FormatError("config: pattern.feature_size_range must be [min, max]");
                cfg.pattern.min_feature = r[0];
                cfg.pattern.max_feature = r[1];
            }
            maybe(p, "seed", cfg.pattern.seed);
        }
        maybe(j, "n_patterns", cfg.n_patterns);
        if (j.contains("fab")) {
            const json& f = j.at("fab");
            reject_unknown(f, {"sigma", "threshold", "edge_noise_amp", "seed"}, "fab");
            maybe(f, "sigma", cfg.fab.sigma);
            maybe(f, "threshold", cfg.fab.threshold);
            maybe(f, "edge_noise_amp", cfg.fab.edge_noise_amp);
            maybe(f, "seed", cfg.fab.seed);
        }
        maybe(j, "fab_runs", cfg.fab_runs);
        if (j.contains("train")) {
            const json& t = j.at("train");
            reject_unknown(t,
                           {"batch_size", "max_epochs", "patience", "seed", "dataset_stride", "ensemble_size",
                            "patch_size", "lr", "threads"},
                           "train");
            maybe(t, "batch_size", cfg.train.batch_size);
            maybe(t, "max_epochs", cfg.train.max_epochs);
            maybe(t, "patience", cfg.train.patience);
            maybe(t, "seed", cfg.train.seed);
            maybe(t, "dataset_stride", cfg.train.dataset_stride);
            maybe(t, "ensemble_size", cfg.train.ensemble_size);
            maybe(t, "patch_size", cfg.train.patch_size);
            maybe(t, "lr", cfg.train.lr);
            maybe(t, "threads", cfg.train.threads);
        }
        if (j.contains("inference")) {
            const json& i = j.at("inference");
            reject_unknown(i, {"stride", "binarize_threshold", "uncertainty_band", "batch_size", "threads"},
                           "inference");
            maybe(i, "stride", cfg.inference.stride);
            maybe(i, "binarize_threshold", cfg.inference.binarize_threshold);
            if (i.contains("uncertainty_band")) {
                auto b = i.at("uncertainty_band").get<std::vector<double>>();
                if (b.size() != 2) throw FormatError("config: inference.uncertainty_band must be [lo, hi]");
                cfg.inference.band_lo = b[0];
                cfg.inference.band_hi = b[1];
            }
            maybe(i, "batch_size", cfg.inference.batch_size);
            maybe(i, "threads", cfg.inference.threads);
        }
        if (j.contains("paths")) {
            const json& p = j.at("paths");
            reject_unknown(p, {"data_dir", "model_dir", "out_dir"}, "paths");
            maybe(p, "data_dir", cfg.data_dir);
            maybe(p, "model_dir", cfg.model_dir);
            maybe(p, "out_dir", cfg.out_dir);
        }
        maybe(j, "nm_per_pixel", cfg.nm_per_pixel);
    } catch (const json::exception& e) {
        throw FormatError(std::string("config field has the wrong type: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open config '" + path + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str());
}

std::string config_to_json(const RunConfig& cfg) {
    json mix;
    for (int k = 0; k < kShapeKinds; ++k) mix[kShapeNames[k]] = cfg.pattern.shape_mix[static_cast<std::size_t>(k)];
    json j = {
        {"pattern",
         {{"width", cfg.pattern.width},
          {"height", cfg.pattern.height},
          {"n_shapes", {cfg.pattern.min_shapes, cfg.pattern.max_shapes}},
          {"shape_mix", mix},
          {"feature_size_range", {cfg.pattern.min_feature, cfg.pattern.max_feature}},
          {"seed", cfg.pattern.seed}}},
        {"n_patterns", cfg.n_patterns},
        {"fab",
         {{"sigma", cfg.fab.sigma},
          {"threshold", cfg.fab.threshold},
          {"edge_noise_amp", cfg.fab.edge_noise_amp},
          {"seed", cfg.fab.seed}}},
        {"fab_runs", cfg.fab_runs},
        {"train",
         {{"batch_size", cfg.train.batch_size},
          {"max_epochs", cfg.train.max_epochs},
          {"patience", cfg.train.patience},
          {"seed", cfg.train.seed},
          {"dataset_stride", cfg.train.dataset_stride},
          {"ensemble_size", cfg.train.ensemble_size},
          {"patch_size", cfg.train.patch_size},
          {"lr", cfg.train.lr},
          {"threads", cfg.train.threads}}},
        {"inference",
         {{"stride", cfg.inference.stride},
          {"binarize_threshold", cfg.inference.binarize_threshold},
          {"uncertainty_band", {cfg.inference.band_lo, cfg.inference.band_hi}},
          {"batch_size", cfg.inference.batch_size},
          {"threads", cfg.inference.threads}}},
        {"paths", {{"data_dir", cfg.data_dir}, {"model_dir", cfg.model_dir}, {"out_dir", cfg.out_dir}}},
        {"nm_per_pixel", cfg.nm_per_pixel},
    };
    return j.dump(2) + "\n";
}

} // namespace fabfix
