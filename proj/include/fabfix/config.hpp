#pragma once

#include <string>

#include "fabfix/correct.hpp"
#include "fabfix/fabsim.hpp"
#include "fabfix/patterns.hpp"
#include "fabfix/training.hpp"

namespace fabfix {

/// Single source of truth for a reproducible pipeline run. Serialized as
/// UTF-8 JSON; command-line flags override individual fields.
struct RunConfig {
    PatternSpec pattern;
    int n_patterns = 30;
    FabParams fab;
    int fab_runs = 1; ///< fabrication runs (distinct noise seeds) per pattern
    TrainConfig train;
    InferenceParams inference;
    std::string data_dir = "data";
    std::string model_dir = "models";
    std::string out_dir = "out";
    double nm_per_pixel = 0.667; ///< metadata only; algorithms work in pixels

    void validate() const;
};

RunConfig default_config();

/// Parse a config JSON document; unknown keys are rejected.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);

std::string config_to_json(const RunConfig& config);

} // namespace fabfix
