#include "spectra/losses.hpp"

#include <cmath>

#include "spectra/error.hpp"

namespace spectra {

namespace {

// log sigmoid(x) = -softplus(-x), computed without overflow.
inline double log_sigmoid(double x) {
    if (x >= 0.0) return -std::log1p(std::exp(-x));
    return x - std::log1p(std::exp(x));
}

inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

constexpr double kNormFloor = 1e-300;

}  // namespace

double loss_weight_for(const LossWeights& w, const std::string& teacher_name) {
    if (w.alpha_s < 0.0 || w.alpha_d < 0.0 || w.alpha_v < 0.0) {
        fail_config("loss weights must be >= 0");
    }
    if (teacher_name == "siglip_t") return w.alpha_s;
    if (teacher_name == "dinov2_t") return w.alpha_d;
    if (teacher_name == "vit_t") return w.alpha_v;
    fail_config("no loss weight for teacher '" + teacher_name + "'");
}

double ContrastiveParams::temperature() const { return std::exp(log_t); }

void register_contrastive_params(ParameterStore& store, double init_log_t, double init_bias) {
    store.add(kContrastiveLogT, Tensor::from({1}, {init_log_t}));
    store.add(kContrastiveBias, Tensor::from({1}, {init_bias}));
}

ContrastiveParams contrastive_from_store(const ParameterStore& store) {
    return {store.value(kContrastiveLogT)[0], store.value(kContrastiveBias)[0]};
}

double sigmoid_contrastive(const EmbeddingBatch& batch, const ContrastiveParams& cp) {
    const int n = batch.pairs();
    if (n < 2) fail_config("sigmoid_contrastive: need at least 2 pairs, got " + std::to_string(n));
    const int d = batch.image_embeds.dim(1);
    const double t = cp.temperature();
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* xi = batch.image_embeds.data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < n; ++j) {
            const double* yj = batch.text_embeds.data() + static_cast<std::size_t>(j) * d;
            double dot = 0.0;
            for (int k = 0; k < d; ++k) dot += xi[k] * yj[k];
            const double logit = t * dot + cp.bias;
            const double z = (i == j) ? 1.0 : -1.0;
            loss -= log_sigmoid(z * logit);
        }
    }
    return loss / n;
}

ContrastiveGrads sigmoid_contrastive_backward(const EmbeddingBatch& batch,
                                              const ContrastiveParams& cp) {
    const int n = batch.pairs();
    const int d = batch.image_embeds.dim(1);
    const double t = cp.temperature();
    ContrastiveGrads g;
    g.dimage = Tensor({n, d});
    g.dtext = Tensor({n, d});
    double dt = 0.0;
    for (int i = 0; i < n; ++i) {
        const double* xi = batch.image_embeds.data() + static_cast<std::size_t>(i) * d;
        double* dxi = g.dimage.data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < n; ++j) {
            const double* yj = batch.text_embeds.data() + static_cast<std::size_t>(j) * d;
            double* dyj = g.dtext.data() + static_cast<std::size_t>(j) * d;
            double dot = 0.0;
            for (int k = 0; k < d; ++k) dot += xi[k] * yj[k];
            const double logit = t * dot + cp.bias;
            const double z = (i == j) ? 1.0 : -1.0;
            // d/dlogit of -(1/n) log sigmoid(z * logit)
            const double dlogit = -z * sigmoid(-z * logit) / n;
            for (int k = 0; k < d; ++k) {
                dxi[k] += dlogit * t * yj[k];
                dyj[k] += dlogit * t * xi[k];
            }
            dt += dlogit * dot;
            g.dbias += dlogit;
        }
    }
    g.dlog_t = dt * t;  // chain through t = exp(log_t)
    return g;
}

MatchTerms feature_match(const Tensor& fs, const Tensor& ft) {
    if (!fs.same_shape(ft)) {
        fail_config("feature_match shape mismatch: " + shape_str(fs.shape()) + " vs " +
                    shape_str(ft.shape()));
    }
    if (fs.rank() != 3) fail_config("feature_match expects rank-3 features");
    const int d = fs.dim(0);
    const int hw = fs.dim(1) * fs.dim(2);
    const std::size_t numel = fs.numel();

    MatchTerms terms;
    for (std::size_t i = 0; i < numel; ++i) {
        const double diff = fs[i] - ft[i];
        terms.l1 += std::fabs(diff);
        terms.mse += diff * diff;
    }
    terms.l1 /= static_cast<double>(numel);
    terms.mse /= static_cast<double>(numel);

    double cos_sum = 0.0;
    for (int p = 0; p < hw; ++p) {
        double dot = 0.0, ns = 0.0, nt = 0.0;
        for (int c = 0; c < d; ++c) {
            const double a = fs[static_cast<std::size_t>(c) * hw + p];
            const double b = ft[static_cast<std::size_t>(c) * hw + p];
            dot += a * b;
            ns += a * a;
            nt += b * b;
        }
        // sqrt of the product: exact 1.0 cosine when the inputs are identical.
        const double denom = std::sqrt(ns * nt);
        double cosv;
        if (denom < kNormFloor) {
            // Degenerate columns: identical zeros count as aligned.
            cosv = (ns < kNormFloor && nt < kNormFloor) ? 1.0 : 0.0;
        } else {
            cosv = dot / denom;
        }
        cos_sum += 1.0 - cosv;
    }
    terms.cos = cos_sum / hw;
    return terms;
}

Tensor feature_match_backward(const Tensor& fs, const Tensor& ft) {
    const int d = fs.dim(0);
    const int hw = fs.dim(1) * fs.dim(2);
    const std::size_t numel = fs.numel();
    Tensor dfs(fs.shape());

    const double inv_numel = 1.0 / static_cast<double>(numel);
    for (std::size_t i = 0; i < numel; ++i) {
        const double diff = fs[i] - ft[i];
        const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
        dfs[i] = (sign + 2.0 * diff) * inv_numel;
    }

    const double inv_hw = 1.0 / hw;
    for (int p = 0; p < hw; ++p) {
        double dot = 0.0, ns = 0.0, nt = 0.0;
        for (int c = 0; c < d; ++c) {
            const double a = fs[static_cast<std::size_t>(c) * hw + p];
            const double b = ft[static_cast<std::size_t>(c) * hw + p];
            dot += a * b;
            ns += a * a;
            nt += b * b;
        }
        const double denom = std::sqrt(ns * nt);
        if (denom < kNormFloor) continue;  // matching degenerate-cosine convention
        // d(1 - cos)/da_c = -(b_c / (nu*nv) - dot * a_c / (nu^3 * nv))
        const double inv_denom = 1.0 / denom;
        const double dot_term = dot / (ns * denom);
        for (int c = 0; c < d; ++c) {
            const double a = fs[static_cast<std::size_t>(c) * hw + p];
            const double b = ft[static_cast<std::size_t>(c) * hw + p];
            dfs[static_cast<std::size_t>(c) * hw + p] -= inv_hw * (b * inv_denom - dot_term * a);
        }
    }
    return dfs;
}

const MatchTerms* LossReport::find(const std::string& teacher_name) const {
    for (const auto& [name, terms] : matches) {
        if (name == teacher_name) return &terms;
    }
    return nullptr;
}

LossReport vect_total(double l_siglip,
                      const std::vector<std::pair<std::string, MatchTerms>>& branches,
                      const LossWeights& w) {
    LossReport report;
    report.l_siglip = l_siglip;
    report.matches = branches;
    report.total = l_siglip;
    for (const auto& [name, terms] : branches) {
        report.total += loss_weight_for(w, name) * terms.total();
    }
    for (const char* required : {"siglip_t", "dinov2_t", "vit_t"}) {
        if (loss_weight_for(w, required) > 0.0 && report.find(required) == nullptr) {
            fail_config(std::string("vect_total: teacher '") + required +
                        "' has weight > 0 but no evaluated branch");
        }
    }
    return report;
}

}  // namespace spectra
