#pragma once

#include <string>
#include <vector>

#include "spectra/tensor.hpp"
#include "spectra/towers.hpp"

namespace spectra {

/// Balancing factors for the per-teacher feature-matching terms
/// (siglip_t, dinov2_t, vit_t). All must be >= 0.
struct LossWeights {
    double alpha_s = 2.0;
    double alpha_d = 1.0;
    double alpha_v = 1.0;
};

double loss_weight_for(const LossWeights& w, const std::string& teacher_name);

/// Trainable contrastive scalars; temperature is exp(log_t) so it stays
/// positive by construction.
struct ContrastiveParams {
    double log_t = 0.0;
    double bias = 0.0;

    double temperature() const;
};

inline constexpr const char* kContrastiveLogT = "contrastive.log_t";
inline constexpr const char* kContrastiveBias = "contrastive.bias";

void register_contrastive_params(ParameterStore& store, double init_log_t, double init_bias);
ContrastiveParams contrastive_from_store(const ParameterStore& store);

/// Pairwise sigmoid loss over all (i, j): logits t<x_i, y_j> + b, label +1 on
/// the diagonal and -1 off it, averaged as -(1/N) sum log sigmoid(z * l).
/// Requires N >= 2 (a single pair has no negatives).
double sigmoid_contrastive(const EmbeddingBatch& batch, const ContrastiveParams& cp);

struct ContrastiveGrads {
    Tensor dimage;  // (n x d_e)
    Tensor dtext;
    double dlog_t = 0.0;
    double dbias = 0.0;
};

ContrastiveGrads sigmoid_contrastive_backward(const EmbeddingBatch& batch,
                                              const ContrastiveParams& cp);

/// Sub-terms of one student/teacher feature comparison: mean absolute error,
/// mean squared error, and mean over spatial positions of one minus the
/// channel-wise cosine.
struct MatchTerms {
    double l1 = 0.0;
    double mse = 0.0;
    double cos = 0.0;

    double total() const { return l1 + mse + cos; }
};

/// Requires identical shapes (d_t x h' x w').
MatchTerms feature_match(const Tensor& fs, const Tensor& ft);

/// d(total)/dFs. The teacher side receives no gradient.
Tensor feature_match_backward(const Tensor& fs, const Tensor& ft);

struct LossReport {
    double l_siglip = 0.0;
    std::vector<std::pair<std::string, MatchTerms>> matches;  // fixed teacher order
    double total = 0.0;

    const MatchTerms* find(const std::string& teacher_name) const;
};

/// Combines the contrastive loss with weighted per-teacher match terms.
/// A teacher whose weight is > 0 but whose branch was not evaluated is a
/// config error.
LossReport vect_total(double l_siglip,
                      const std::vector<std::pair<std::string, MatchTerms>>& branches,
                      const LossWeights& w);

}  // namespace spectra
