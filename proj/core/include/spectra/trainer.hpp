#pragma once

#include <map>
#include <string>
#include <vector>

#include "spectra/checkpoint.hpp"
#include "spectra/model.hpp"
#include "spectra/synthgeo.hpp"

namespace spectra {

struct TrainConfig {
    double lr = 5e-4;
    double weight_decay = 1e-7;
    int epochs = 5;  // 20 for the full protocol
    int batch = 16;
    std::uint64_t seed = 42;
    LossWeights weights;                        // defaults 2.0 / 1.0 / 1.0
    std::vector<std::string> modality_filter;   // empty = all modalities
    TeacherToggles toggles;
    bool distill = true;   // false = contrastive-only (no feature matching)
    double clip_norm = 0.0;  // 0 disables gradient clipping
    std::uint64_t config_hash = 0;  // recorded into checkpoints

    ObjectiveSpec objective() const;
};

/// First/second Adam moments per trainable parameter plus the shared step
/// counter for bias correction.
struct AdamState {
    std::map<std::string, std::pair<Tensor, Tensor>> moments;
    std::uint64_t step = 0;
};

/// Decoupled weight decay (theta *= 1 - lr*wd) followed by the Adam moment
/// update with bias correction. Frozen parameters are untouched. Non-finite
/// gradients are a hard error.
void adamw_step(ParameterStore& store, AdamState& state, double lr, double weight_decay,
                double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

struct StepLogRow {
    int step = 0;
    double l_siglip = 0.0;
    double l_m_siglip = 0.0;
    double l_m_dinov2 = 0.0;
    double l_m_vit = 0.0;
    double total = 0.0;
};

/// CSV: step,l_siglip,l_m_siglip,l_m_dinov2,l_m_vit,total
void write_step_log(const std::vector<StepLogRow>& log, const std::string& path);
std::vector<StepLogRow> read_step_log(const std::string& path);

struct TrainResult {
    std::vector<StepLogRow> log;
    Checkpoint initial;  // pre-training snapshot, no optimizer state
    Checkpoint trained;  // includes optimizer moments
};

/// Deterministic loop: per epoch a seeded shuffle ("shuffle/epoch<i>"),
/// fixed-size batches with the last partial batch dropped, full VECT or
/// contrastive-only objective, AdamW updates of trainable parameters only.
/// `max_steps` > 0 stops early after that many optimizer steps.
TrainResult train(StudentModel& model, std::vector<TrainRecord> records, const TrainConfig& config,
                  int max_steps = 0);

/// Reads rasters and tokenizes captions for manifest records matching the
/// modality allowlist (empty = all) and split ("" = all). Paths resolve
/// relative to base_dir.
std::vector<TrainRecord> load_training_records(const DatasetManifest& manifest,
                                               const std::string& base_dir,
                                               const std::vector<std::string>& modality_filter,
                                               const std::string& split_filter,
                                               const TextTower::Config& text_cfg);

/// Expands the filter keywords: "rgb" -> {rgb}, "others" -> every known
/// modality except rgb, "all"/empty -> everything.
std::vector<std::string> expand_modality_filter(const std::string& keyword);

}  // namespace spectra
