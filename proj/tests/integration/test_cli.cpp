#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "fabfix/pgm.hpp"
#include "fabfix/raster.hpp"

using namespace fabfix;
namespace fs = std::filesystem;

namespace {

struct Sandbox {
    fs::path root;
    Sandbox() {
        root = fs::temp_directory_path() / ("fabfix_cli_" + std::to_string(std::random_device{}()));
        fs::create_directories(root);
    }
    ~Sandbox() { fs::remove_all(root); }
    std::string path(const std::string& rel) const { return (root / rel).string(); }
};

int run(const std::string& args) {
    const std::string cmd = std::string(FABFIX_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

// Small, fast configuration: 32-px patches, one-member ensembles.
const char* kTinyConfig = R"({
  "pattern": {"width": 96, "height": 96, "n_shapes": [6, 12],
              "feature_size_range": [5, 24], "seed": 11},
  "n_patterns": 2,
  "fab": {"sigma": 1.0, "threshold": 0.5, "edge_noise_amp": 0.0, "seed": 4},
  "train": {"batch_size": 8, "max_epochs": 3, "patience": 3, "seed": 1,
            "dataset_stride": 16, "ensemble_size": 1, "patch_size": 32},
  "inference": {"stride": 16}
})";

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

} // namespace

TEST_CASE("cli: full pipeline runs end to end") {
    Sandbox box;
    {
        std::ofstream cfg(box.path("config.json"));
        cfg << kTinyConfig;
    }

    // gen-data
    REQUIRE(run("gen-data --config " + box.path("config.json") + " --out " + box.path("data")) == 0);
    CHECK(fs::exists(box.path("data/pattern_000.pgm")));
    CHECK(fs::exists(box.path("data/fabricated_001.pgm")));
    CHECK(fs::exists(box.path("data/dataset_manifest.json")));

    // train-forward, then both corrector regimes
    REQUIRE(run("train-forward --config " + box.path("config.json") + " --data " + box.path("data") + " --out " +
                box.path("fwd")) == 0);
    CHECK(fs::exists(box.path("fwd/ensemble.json")));
    CHECK(fs::exists(box.path("fwd/member_00.fabw")));
    CHECK(fs::exists(box.path("fwd/member_00_epochs.csv")));

    REQUIRE(run("train-corrector --config " + box.path("config.json") + " --data " + box.path("data") +
                " --forward " + box.path("fwd") + " --out " + box.path("corr") + " --mode tandem") == 0);
    CHECK(fs::exists(box.path("corr/member_00.fabw")));

    REQUIRE(run("train-corrector --config " + box.path("config.json") + " --data " + box.path("data") + " --out " +
                box.path("corr_ind") + " --mode independent") == 0);

    // a probe layout for inference
    Bitmap probe = rasterize({{8, 8, 56, 24}, {24, 24, 40, 56}}, 64, 64);
    write_pgm(probe, box.path("probe.pgm"));

    REQUIRE(run("predict --layout " + box.path("probe.pgm") + " --forward " + box.path("fwd") + " --stride 16 --out " +
                box.path("out")) == 0);
    CHECK(fs::exists(box.path("out/probe_pred_field.pgm")));
    CHECK(fs::exists(box.path("out/probe_pred.pgm")));

    REQUIRE(run("correct --layout " + box.path("probe.pgm") + " --corrector " + box.path("corr") +
                " --stride 16 --out " + box.path("out")) == 0);
    CHECK(fs::exists(box.path("out/probe_correction_field.pgm")));
    CHECK(fs::exists(box.path("out/probe_correction.pgm")));

    // correcting with a forward ensemble is a usage error
    CHECK(run("correct --layout " + box.path("probe.pgm") + " --corrector " + box.path("fwd") + " --stride 16 --out " +
              box.path("out")) == 2);

    // evaluate: identical images report zero error pixels
    REQUIRE(run("evaluate --nominal " + box.path("probe.pgm") + " --candidate " + box.path("probe.pgm") + " --out " +
                box.path("eval")) == 0);
    std::string csv = read_file(box.path("eval/results.csv"));
    CHECK(csv.find("candidate,probe,0,-,-") != std::string::npos);
    CHECK(fs::exists(box.path("eval/diff_probe.ppm")));
}

TEST_CASE("cli: gen-data with a single exact-fit pattern lists one pair") {
    Sandbox box;
    {
        std::ofstream cfg(box.path("config.json"));
        cfg << R"({
          "pattern": {"width": 128, "height": 128, "n_shapes": [4, 8],
                      "feature_size_range": [6, 48], "seed": 2},
          "n_patterns": 1,
          "fab": {"sigma": 1.0},
          "train": {"dataset_stride": 32, "patch_size": 128, "ensemble_size": 1}
        })";
    }
    REQUIRE(run("gen-data --config " + box.path("config.json") + " --out " + box.path("data")) == 0);
    std::string manifest = read_file(box.path("data/dataset_manifest.json"));
    CHECK(manifest.find("pattern_000.pgm") != std::string::npos);
    CHECK(manifest.find("pattern_001.pgm") == std::string::npos);
}

TEST_CASE("cli: evaluate reproduces the published reduction factors") {
    Sandbox box;
    REQUIRE(run("evaluate --counts 1401:586 --counts 2387:1063 --counts 2133:825 --counts 114891:73650 --out " +
                box.path("eval")) == 0);
    std::string csv = read_file(box.path("eval/results.csv"));
    CHECK(csv.find("counts,1401:586,815,2.4,") != std::string::npos);
    CHECK(csv.find("counts,2387:1063,1324,2.2,") != std::string::npos);
    CHECK(csv.find("counts,2133:825,1308,2.6,") != std::string::npos);
    CHECK(csv.find("counts,114891:73650,41241,1.6,") != std::string::npos);
}

TEST_CASE("cli: exit codes distinguish usage and data errors") {
    Sandbox box;
    CHECK(run("no-such-command") == 2);
    CHECK(run("gen-data --out " + box.path("x")) == 2);                       // missing --config
    CHECK(run("gen-data --config /nonexistent.json --out " + box.path("x")) == 3);
    CHECK(run("evaluate --counts banana --out " + box.path("x")) == 2);
    CHECK(run("predict --layout /nonexistent.pgm --forward " + box.path("f") + " --out " + box.path("x")) == 3);

    // invalid config value -> usage error
    {
        std::ofstream cfg(box.path("bad.json"));
        cfg << R"({"fab": {"sigma": -3.0}})";
    }
    CHECK(run("gen-data --config " + box.path("bad.json") + " --out " + box.path("x")) == 2);

    // unknown config key -> data/format error
    {
        std::ofstream cfg(box.path("unknown.json"));
        cfg << R"({"fabrication": {}})";
    }
    CHECK(run("gen-data --config " + box.path("unknown.json") + " --out " + box.path("x")) == 3);
}

TEST_CASE("cli: reruns produce identical bytes") {
    Sandbox box;
    {
        std::ofstream cfg(box.path("config.json"));
        cfg << kTinyConfig;
    }
    REQUIRE(run("gen-data --config " + box.path("config.json") + " --out " + box.path("a")) == 0);
    REQUIRE(run("gen-data --config " + box.path("config.json") + " --out " + box.path("b")) == 0);
    CHECK(read_file(box.path("a/pattern_000.pgm")) == read_file(box.path("b/pattern_000.pgm")));
    CHECK(read_file(box.path("a/fabricated_000.pgm")) == read_file(box.path("b/fabricated_000.pgm")));
    CHECK(read_file(box.path("a/dataset_manifest.json")) == read_file(box.path("b/dataset_manifest.json")));

    REQUIRE(run("train-forward --config " + box.path("config.json") + " --data " + box.path("a") + " --out " +
                box.path("fwd_a")) == 0);
    REQUIRE(run("train-forward --config " + box.path("config.json") + " --data " + box.path("b") + " --out " +
                box.path("fwd_b")) == 0);
    CHECK(read_file(box.path("fwd_a/member_00.fabw")) == read_file(box.path("fwd_b/member_00.fabw")));
    CHECK(read_file(box.path("fwd_a/member_00_epochs.csv")) == read_file(box.path("fwd_b/member_00_epochs.csv")));
}
