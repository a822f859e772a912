#pragma once

#include <string>
#include <vector>

#include "spectra/model.hpp"
#include "spectra/synthgeo.hpp"
#include "spectra/toml.hpp"
#include "spectra/trainer.hpp"

namespace spectra {

struct MergeConfig {
    double m1 = 0.9;
    double m2 = 0.5;
    std::vector<double> grid = {0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0};
};

struct EvalConfig {
    std::string task = "zeroshot";  // zeroshot | multilabel | retrieval
    std::string split = "eval";
    std::vector<std::string> modality_filter;  // empty = all
    std::vector<std::string> templates = {"a satellite image of {class}."};
    std::vector<std::string> classes;  // empty = full land-cover vocabulary
};

/// Everything a run needs, mirrored one-to-one by the TOML sections
/// [synthgeo] [model] [teachers] [trainer] [losses] [merge] [evalkit] plus a
/// top-level seed. Unknown keys are rejected.
struct RunConfig {
    std::uint64_t seed = 42;
    GenConfig gen;
    ModelConfig model = ModelConfig::desk_default();
    TrainConfig train;
    MergeConfig merge;
    EvalConfig eval;

    std::vector<std::string> eval_classes() const;
};

RunConfig default_run_config();

/// Parses, applies over defaults, and rejects unknown keys. The SPECTRA_SEED
/// environment variable, when set, overrides the config seed.
RunConfig load_run_config(const std::string& path);

/// Applies a parsed table over `cfg` (exposed for tests).
void apply_config_table(const TomlTable& table, RunConfig& cfg);

/// One line per key: "section.key = default  # description".
std::string config_defaults_help();

/// Stable hash of the fields that shape training, recorded into checkpoints.
std::uint64_t run_config_hash(const RunConfig& cfg);

}  // namespace spectra
