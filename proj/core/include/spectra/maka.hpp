#pragma once

#include <string>
#include <vector>

#include "spectra/image.hpp"
#include "spectra/tensor.hpp"

namespace spectra {

/// Per-teacher output contract: channel width and spatial dims the student
/// features must be brought to before matching.
struct TeacherTarget {
    std::string teacher_name;
    int width = 0;   // d_t
    int grid_h = 0;  // H'
    int grid_w = 0;  // W'
};

/// Modality-aware knowledge agglomeration: a wavelength-derived prompt vector
/// modulates layer normalization of the student feature map (scale gamma,
/// shift beta, both learned from the prompt), and a 1x1 convolution projects
/// to the teacher width. The prompt projection W_proj is shared; the prompt
/// map and the projector exist once per teacher (optionally shared).
class Maka {
public:
    struct Config {
        int feature_dim = 64;  // d, student feature channels
        int d_lambda = 128;
        double eps = 1e-6;
        double pe_scale = 1000.0;
        double pe_temperature = 10000.0;
        bool per_teacher_prompt = true;
    };

    Maka() = default;
    Maka(Config cfg, std::vector<TeacherTarget> targets);

    /// W_prompt starts at zero, so modulation begins as plain layer norm.
    void register_params(ParameterStore& store, std::uint64_t seed) const;

    /// Fused modality embedding V_p = (1/C) sum_c W_proj V_lambda_c.
    Tensor modality_prompt(const ParameterStore& store, const WavelengthSpec& spec) const;

    struct Cache {
        Tensor mean_raw;   // (d_lambda), mean of raw wavelength embeddings
        Tensor prompt;     // V_p (d)
        Tensor gamma, beta;
        Tensor resized;    // (d x h' x w')
        Tensor normed;     // LN of resized
        Tensor film_out;   // pre-projector output
        int src_h = 0, src_w = 0;
        std::string teacher_name;
    };

    /// resize -> conditional layer norm -> 1x1 projection. Output is
    /// (width x grid_h x grid_w) for the named target.
    Tensor agglomerate(const ParameterStore& store, const Tensor& features,
                       const WavelengthSpec& spec, const TeacherTarget& target,
                       Cache* cache = nullptr) const;

    /// Returns dFeatures; accumulates all parameter grads.
    Tensor backward(ParameterStore& store, const Cache& cache, const Tensor& dprojected) const;

    const std::vector<TeacherTarget>& targets() const { return targets_; }
    const TeacherTarget& target(const std::string& teacher_name) const;

    std::string prompt_param(const std::string& teacher_name) const;
    std::string projector_weight_param(const std::string& teacher_name) const;
    std::string projector_bias_param(const std::string& teacher_name) const;

    const Config& config() const { return cfg_; }

private:
    Config cfg_;
    std::vector<TeacherTarget> targets_;
};

/// F' = LN(F) + gamma (.) LN(F) + beta, LN channel-wise per spatial position.
/// Exposed standalone for the algebraic-rewrite oracle in tests.
Tensor conditional_layer_norm(const Tensor& features, const Tensor& gamma, const Tensor& beta,
                              double eps);

}  // namespace spectra
