#pragma once

#include <map>
#include <string>
#include <vector>

#include "spectra/losses.hpp"
#include "spectra/maka.hpp"
#include "spectra/teachers.hpp"
#include "spectra/towers.hpp"

namespace spectra {

struct ModelConfig {
    VisionTower::Config vision;
    TextTower::Config text;
    Maka::Config maka;
    double init_log_t = 2.302585092994046;  // ln 10
    double init_bias = -10.0;
    std::vector<TeacherConfig> teachers = default_teacher_configs();

    /// Desk-scale defaults: 64x64 images, patch 8, 64-dim towers, 32-dim
    /// joint space.
    static ModelConfig desk_default();

    /// Gradcheck-sized variant: 16x16 images, patch 2 (8x8 feature grid),
    /// 64-dim towers, single blocks, small wavelength embedding.
    static ModelConfig tiny();
};

struct TeacherToggles {
    bool siglip_t = true;
    bool dinov2_t = true;
    bool vit_t = true;

    bool enabled(const std::string& name) const;
};

/// What a forward/backward pass optimizes: the contrastive term and/or the
/// per-teacher feature-matching branches (evaluated only for enabled
/// teachers).
struct ObjectiveSpec {
    bool contrastive = true;
    LossWeights weights;
    TeacherToggles toggles;
};

struct TrainRecord {
    MultimodalImage image;
    TextTokens tokens;
    /// Optional precomputed teacher features keyed by teacher name; teachers
    /// are frozen, so these are constant per record.
    std::map<std::string, Tensor> teacher_features;
};

/// The trainable student: hypernet-fed vision tower, text tower, MaKA heads
/// and contrastive scalars over one parameter store, plus the frozen teacher
/// set used for distillation targets.
class StudentModel {
public:
    explicit StudentModel(ModelConfig cfg);

    void init_params(std::uint64_t seed);

    ParameterStore& store() { return store_; }
    const ParameterStore& store() const { return store_; }
    const VisionTower& vision() const { return vision_; }
    const TextTower& text() const { return text_; }
    const Maka& maka() const { return maka_; }
    const TeacherSet& teachers() const { return teachers_; }
    const ModelConfig& config() const { return cfg_; }

    struct StepOutput {
        LossReport report;
        EmbeddingBatch batch;  // rows only when the objective includes contrastive
    };

    /// Loss evaluation without caches or gradients.
    StepOutput forward(const std::vector<TrainRecord>& records, const ObjectiveSpec& spec) const;

    /// Loss + gradient accumulation into the store (caller zeroes grads).
    StepOutput forward_backward(const std::vector<TrainRecord>& records, const ObjectiveSpec& spec);

    /// Teacher features for one record (rgb view -> frozen forward).
    Tensor teacher_features(const TeacherModel& teacher, const MultimodalImage& img) const;

    /// Fills record.teacher_features for every enabled teacher.
    void precompute_teacher_features(std::vector<TrainRecord>& records,
                                     const TeacherToggles& toggles) const;

private:
    ModelConfig cfg_;
    ParameterStore store_;
    VisionTower vision_;
    TextTower text_;
    Maka maka_;
    TeacherSet teachers_;

    StepOutput run(const std::vector<TrainRecord>& records, const ObjectiveSpec& spec,
                   bool with_grads);
};

}  // namespace spectra
