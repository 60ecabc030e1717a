// fabfix: learn a virtual-fabrication forward model and a tandem-trained
// corrector, then apply the corrector to binary layouts.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "fabfix/config.hpp"
#include "fabfix/correct.hpp"
#include "fabfix/metrics.hpp"
#include "fabfix/patterns.hpp"
#include "fabfix/pgm.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fabfix;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitTraining = 4;

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

RunConfig load_or_default(const std::string& config_path) {
    return config_path.empty() ? default_config() : load_config(config_path);
}

std::string pattern_name(int i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "pattern_%03d.pgm", i);
    return buf;
}

std::string fabricated_name(int i, int run, int total_runs) {
    char buf[48];
    if (total_runs == 1) {
        std::snprintf(buf, sizeof(buf), "fabricated_%03d.pgm", i);
    } else {
        std::snprintf(buf, sizeof(buf), "fabricated_%03d_r%02d.pgm", i, run);
    }
    return buf;
}

void cmd_gen_data(const RunConfig& cfg, const std::string& out_dir) {
    cfg.validate();
    fs::create_directories(out_dir);

    std::vector<Bitmap> corpus = generate_corpus(cfg.pattern, cfg.n_patterns);
    json pairs = json::array();
    for (int i = 0; i < cfg.n_patterns; ++i) {
        const std::string layout_name = pattern_name(i);
        write_pgm(corpus[static_cast<std::size_t>(i)], (fs::path(out_dir) / layout_name).string());
        for (int run = 0; run < cfg.fab_runs; ++run) {
            FabParams fab = cfg.fab;
            fab.seed = cfg.fab.seed + static_cast<std::uint64_t>(run);
            const std::string fab_name = fabricated_name(i, run, cfg.fab_runs);
            write_pgm(fabricate(corpus[static_cast<std::size_t>(i)], fab),
                      (fs::path(out_dir) / fab_name).string());
            pairs.push_back({{"layout", layout_name}, {"fabricated", fab_name}});
        }
    }

    json manifest = {
        {"patch_size", cfg.train.patch_size},
        {"stride", cfg.train.dataset_stride},
        {"split_seed", cfg.train.seed},
        {"fab",
         {{"sigma", cfg.fab.sigma},
          {"threshold", cfg.fab.threshold},
          {"edge_noise_amp", cfg.fab.edge_noise_amp},
          {"seed", cfg.fab.seed}}},
        {"pairs", pairs},
    };
    std::ofstream out(fs::path(out_dir) / "dataset_manifest.json", std::ios::trunc);
    if (!out) throw FormatError("cannot write dataset manifest in '" + out_dir + "'");
    out << manifest.dump(2) << "\n";
    std::cout << "wrote " << pairs.size() << " pair(s) to " << out_dir << "\n";
}

Dataset dataset_from_manifest(const std::string& data_dir, const RunConfig& cfg) {
    const fs::path manifest_path = fs::path(data_dir) / "dataset_manifest.json";
    std::ifstream in(manifest_path);
    if (!in) throw FormatError("cannot open '" + manifest_path.string() + "'");
    json manifest;
    try {
        in >> manifest;
    } catch (const json::exception& e) {
        throw FormatError(manifest_path.string() + " is not valid JSON: " + std::string(e.what()));
    }

    const int patch_size = manifest.value("patch_size", cfg.train.patch_size);
    const int stride = manifest.value("stride", cfg.train.dataset_stride);
    const std::uint64_t split_seed = manifest.value("split_seed", cfg.train.seed);

    std::vector<std::pair<Bitmap, Bitmap>> pairs;
    for (const json& p : manifest.at("pairs")) {
        Bitmap layout = read_pgm((fs::path(data_dir) / p.at("layout").get<std::string>()).string());
        Bitmap fabricated = read_pgm((fs::path(data_dir) / p.at("fabricated").get<std::string>()).string());
        pairs.emplace_back(std::move(layout), std::move(fabricated));
    }
    return build_dataset_from_pairs(pairs, stride, patch_size, split_seed);
}

void save_trained(const EnsembleResult& result, const std::string& out_dir) {
    std::vector<std::string> metas;
    for (const TrainResult& r : result.members) {
        json meta = {{"best_epoch", r.best_epoch},
                     {"best_test_bce", r.best_test_bce},
                     {"epochs_run", r.epochs.size()}};
        metas.push_back(meta.dump());
    }
    save_ensemble(result.ensemble, out_dir, &metas);
    for (std::size_t k = 0; k < result.members.size(); ++k) {
        char name[48];
        std::snprintf(name, sizeof(name), "member_%02zu_epochs.csv", k);
        write_epoch_csv(result.members[k].epochs, (fs::path(out_dir) / name).string());
    }
    for (std::size_t k = 0; k < result.members.size(); ++k) {
        std::printf("member %02zu: best test BCE %.6f at epoch %d\n", k, result.members[k].best_test_bce,
                    result.members[k].best_epoch);
    }
}

void cmd_train_forward(const RunConfig& cfg, const std::string& data_dir, const std::string& out_dir) {
    Dataset ds = dataset_from_manifest(data_dir, cfg);
    std::cout << "dataset: " << ds.count() << " pairs (" << ds.count(Split::Train) << " train / "
              << ds.count(Split::Test) << " test)\n";
    EnsembleResult result = train_ensemble(Regime::Forward, ds, cfg.train);
    save_trained(result, out_dir);
}

void cmd_train_corrector(const RunConfig& cfg, const std::string& data_dir, const std::string& forward_dir,
                         const std::string& out_dir, const std::string& mode) {
    Dataset ds = dataset_from_manifest(data_dir, cfg);
    std::cout << "dataset: " << ds.count() << " pairs (" << ds.count(Split::Train) << " train / "
              << ds.count(Split::Test) << " test)\n";

    EnsembleResult result;
    if (mode == "tandem") {
        if (forward_dir.empty()) throw ParamError("--mode tandem requires --forward");
        Ensemble forward_ens = load_ensemble(forward_dir);
        result = train_ensemble(Regime::InverseTandem, ds, cfg.train, &forward_ens);
    } else if (mode == "independent") {
        result = train_ensemble(Regime::InverseIndependent, ds, cfg.train);
    } else {
        throw ParamError("--mode must be 'tandem' or 'independent', got '" + mode + "'");
    }
    save_trained(result, out_dir);
}

void write_inference_outputs(const Field& field, double threshold, const std::string& out_dir,
                             const std::string& stem, const char* suffix) {
    fs::create_directories(out_dir);
    const std::string field_path = (fs::path(out_dir) / (stem + "_" + suffix + "_field.pgm")).string();
    const std::string bin_path = (fs::path(out_dir) / (stem + "_" + suffix + ".pgm")).string();
    write_pgm(field, field_path);
    write_pgm(binarize(field, threshold), bin_path);
    std::cout << field_path << "\n" << bin_path << "\n";
}

void cmd_predict(const RunConfig& cfg, const std::string& layout_path, const std::string& forward_dir,
                 std::optional<int> stride, const std::string& out_dir) {
    Bitmap layout = read_pgm(layout_path);
    Ensemble ens = load_ensemble(forward_dir);
    InferenceParams params = cfg.inference;
    if (stride) params.stride = *stride;
    Field field = infer_full(layout, ens, params, Ensemble::Role::Forward);
    write_inference_outputs(field, params.binarize_threshold, out_dir, stem_of(layout_path), "pred");
}

void cmd_correct(const RunConfig& cfg, const std::string& layout_path, const std::string& corrector_dir,
                 std::optional<int> stride, const std::string& out_dir) {
    Bitmap layout = read_pgm(layout_path);
    Ensemble ens = load_ensemble(corrector_dir);
    InferenceParams params = cfg.inference;
    if (stride) params.stride = *stride;
    Correction c = correct_layout(layout, ens, params);
    write_inference_outputs(c.field, params.binarize_threshold, out_dir, stem_of(layout_path), "correction");
}

void cmd_evaluate(const std::string& nominal_path, const std::vector<std::string>& candidate_paths,
                  const std::vector<std::string>& count_pairs, const std::string& out_dir) {
    if (candidate_paths.empty() && count_pairs.empty()) {
        throw ParamError("evaluate needs --candidate images and/or --counts pairs");
    }
    if (!candidate_paths.empty() && nominal_path.empty()) {
        throw ParamError("--candidate requires --nominal");
    }
    fs::create_directories(out_dir);

    std::string csv = "kind,name,error_pixels,reduction_vs_first,exact_ratio\n";
    char line[256];

    if (!candidate_paths.empty()) {
        Bitmap nominal = read_pgm(nominal_path);
        long long baseline = -1;
        for (const std::string& path : candidate_paths) {
            Bitmap candidate = read_pgm(path);
            const long long errors = error_pixels(nominal, candidate);
            DiffMap map = diff_map(nominal, candidate);
            write_diff_ppm(map, (fs::path(out_dir) / ("diff_" + stem_of(path) + ".ppm")).string());

            std::string reduction = "-", exact = "-";
            if (baseline < 0) {
                baseline = errors;
            } else {
                ReductionFactor r = reduction_factor(baseline, errors);
                reduction = r.display();
                char num[40];
                std::snprintf(num, sizeof(num), "%.6f", r.ratio);
                exact = r.finite ? num : "inf";
            }
            std::snprintf(line, sizeof(line), "candidate,%s,%lld,%s,%s\n", stem_of(path).c_str(), errors,
                          reduction.c_str(), exact.c_str());
            csv += line;
        }
    }

    for (const std::string& pair : count_pairs) {
        const std::size_t sep = pair.find(':');
        if (sep == std::string::npos) throw ParamError("--counts expects UNCORRECTED:CORRECTED, got '" + pair + "'");
        long long e_unc = 0, e_cor = 0;
        try {
            e_unc = std::stoll(pair.substr(0, sep));
            e_cor = std::stoll(pair.substr(sep + 1));
        } catch (const std::exception&) {
            throw ParamError("--counts expects integers, got '" + pair + "'");
        }
        ReductionFactor r = reduction_factor(e_unc, e_cor);
        char num[40];
        std::snprintf(num, sizeof(num), "%.6f", r.ratio);
        std::snprintf(line, sizeof(line), "counts,%s,%lld,%s,%s\n", pair.c_str(), e_unc - e_cor,
                      r.display().c_str(), r.finite ? num : "inf");
        csv += line;
    }

    std::ofstream out(fs::path(out_dir) / "results.csv", std::ios::trunc);
    if (!out) throw FormatError("cannot write results.csv in '" + out_dir + "'");
    out << csv;
    std::cout << csv;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"virtual-fabrication model and layout corrector toolkit"};
    app.require_subcommand(1);

    std::string config_path, data_dir, out_dir, forward_dir, corrector_dir, layout_path, nominal_path, mode;
    std::vector<std::string> candidates, counts;
    std::optional<int> stride_flag, n_patterns_flag, ensemble_flag, epochs_flag, threads_flag;
    std::optional<std::uint64_t> seed_flag;

    CLI::App* gen = app.add_subcommand("gen-data", "generate patterns and fabricated counterparts");
    gen->add_option("--config", config_path, "run-config JSON")->required();
    gen->add_option("--out", out_dir, "output directory")->required();
    gen->add_option("--n-patterns", n_patterns_flag, "override pattern count");
    gen->add_option("--seed", seed_flag, "override pattern seed");

    CLI::App* tf = app.add_subcommand("train-forward", "train the forward predictor ensemble");
    tf->add_option("--config", config_path, "run-config JSON")->required();
    tf->add_option("--data", data_dir, "gen-data output directory")->required();
    tf->add_option("--out", out_dir, "ensemble output directory")->required();
    tf->add_option("--ensemble-size", ensemble_flag, "override ensemble size");
    tf->add_option("--max-epochs", epochs_flag, "override epoch budget");
    tf->add_option("--threads", threads_flag, "override member parallelism");

    CLI::App* tc = app.add_subcommand("train-corrector", "train the inverse corrector ensemble");
    tc->add_option("--config", config_path, "run-config JSON")->required();
    tc->add_option("--data", data_dir, "gen-data output directory")->required();
    tc->add_option("--forward", forward_dir, "pretrained forward ensemble (tandem mode)");
    tc->add_option("--out", out_dir, "ensemble output directory")->required();
    tc->add_option("--mode", mode, "tandem|independent")->required();
    tc->add_option("--ensemble-size", ensemble_flag, "override ensemble size");
    tc->add_option("--max-epochs", epochs_flag, "override epoch budget");
    tc->add_option("--threads", threads_flag, "override member parallelism");

    CLI::App* pr = app.add_subcommand("predict", "predict the fabricated outcome of a layout");
    pr->add_option("--layout", layout_path, "layout PGM")->required();
    pr->add_option("--forward", forward_dir, "forward ensemble directory")->required();
    pr->add_option("--stride", stride_flag, "scan stride in pixels");
    pr->add_option("--out", out_dir, "output directory")->required();
    pr->add_option("--config", config_path, "run-config JSON (optional)");

    CLI::App* co = app.add_subcommand("correct", "correct a layout with the trained corrector");
    co->add_option("--layout", layout_path, "nominal layout PGM")->required();
    co->add_option("--corrector", corrector_dir, "corrector ensemble directory")->required();
    co->add_option("--stride", stride_flag, "scan stride in pixels");
    co->add_option("--out", out_dir, "output directory")->required();
    co->add_option("--config", config_path, "run-config JSON (optional)");

    CLI::App* ev = app.add_subcommand("evaluate", "error pixels, reduction factors, diff maps");
    ev->add_option("--nominal", nominal_path, "nominal layout PGM");
    ev->add_option("--candidate", candidates, "candidate PGM (repeatable; first is the baseline)");
    ev->add_option("--counts", counts, "raw UNCORRECTED:CORRECTED error-pixel counts (repeatable)");
    ev->add_option("--out", out_dir, "output directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        RunConfig cfg = load_or_default(config_path);
        if (n_patterns_flag) cfg.n_patterns = *n_patterns_flag;
        if (seed_flag) cfg.pattern.seed = *seed_flag;
        if (ensemble_flag) cfg.train.ensemble_size = *ensemble_flag;
        if (epochs_flag) cfg.train.max_epochs = *epochs_flag;
        if (threads_flag) cfg.train.threads = *threads_flag;

        if (gen->parsed()) {
            cmd_gen_data(cfg, out_dir);
        } else if (tf->parsed()) {
            cmd_train_forward(cfg, data_dir, out_dir);
        } else if (tc->parsed()) {
            cmd_train_corrector(cfg, data_dir, forward_dir, out_dir, mode);
        } else if (pr->parsed()) {
            cmd_predict(cfg, layout_path, forward_dir, stride_flag, out_dir);
        } else if (co->parsed()) {
            cmd_correct(cfg, layout_path, corrector_dir, stride_flag, out_dir);
        } else if (ev->parsed()) {
            cmd_evaluate(nominal_path, candidates, counts, out_dir);
        }
        return 0;
    } catch (const TrainingError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitTraining;
    } catch (const OptimizerError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitTraining;
    } catch (const ParamError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitData;
    }
}
