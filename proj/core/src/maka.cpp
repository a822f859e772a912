#include "spectra/maka.hpp"

#include "spectra/error.hpp"
#include "spectra/hypernet.hpp"
#include "spectra/kernels.hpp"

namespace spectra {

Tensor conditional_layer_norm(const Tensor& features, const Tensor& gamma, const Tensor& beta,
                              double eps) {
    const int d = features.dim(0);
    const int hw = features.dim(1) * features.dim(2);
    Tensor normed = layer_norm_chw(features, eps);
    Tensor out(features.shape());
    for (int c = 0; c < d; ++c) {
        const double g = gamma[static_cast<std::size_t>(c)];
        const double b = beta[static_cast<std::size_t>(c)];
        const double* in = normed.data() + static_cast<std::size_t>(c) * hw;
        double* o = out.data() + static_cast<std::size_t>(c) * hw;
        for (int p = 0; p < hw; ++p) o[p] = in[p] + g * in[p] + b;
    }
    return out;
}

Maka::Maka(Config cfg, std::vector<TeacherTarget> targets)
    : cfg_(cfg), targets_(std::move(targets)) {}

std::string Maka::prompt_param(const std::string& teacher_name) const {
    return cfg_.per_teacher_prompt ? "maka." + teacher_name + ".w_prompt" : "maka.shared.w_prompt";
}

std::string Maka::projector_weight_param(const std::string& teacher_name) const {
    return "maka." + teacher_name + ".proj.w";
}

std::string Maka::projector_bias_param(const std::string& teacher_name) const {
    return "maka." + teacher_name + ".proj.b";
}

void Maka::register_params(ParameterStore& store, std::uint64_t seed) const {
    const int d = cfg_.feature_dim;
    store.add("maka.shared.w_proj", normal_init({d, cfg_.d_lambda}, seed, "maka.shared.w_proj"));
    if (!cfg_.per_teacher_prompt) {
        store.add("maka.shared.w_prompt", Tensor({2 * d, d}));
    }
    for (const auto& t : targets_) {
        if (cfg_.per_teacher_prompt) {
            store.add(prompt_param(t.teacher_name), Tensor({2 * d, d}));
        }
        store.add(projector_weight_param(t.teacher_name),
                  normal_init({t.width, d}, seed, projector_weight_param(t.teacher_name)));
        store.add(projector_bias_param(t.teacher_name), Tensor({t.width}));
    }
}

const TeacherTarget& Maka::target(const std::string& teacher_name) const {
    for (const auto& t : targets_) {
        if (t.teacher_name == teacher_name) return t;
    }
    fail_config("maka: unknown teacher target '" + teacher_name + "'");
}

Tensor Maka::modality_prompt(const ParameterStore& store, const WavelengthSpec& spec) const {
    Tensor raw = encode_wavelengths(spec, cfg_.d_lambda, cfg_.pe_scale, cfg_.pe_temperature);
    Tensor mean = mean_rows(raw);
    const Tensor& w_proj = store.value("maka.shared.w_proj");
    Tensor prompt({cfg_.feature_dim});
    mm(w_proj.data(), cfg_.feature_dim, cfg_.d_lambda, mean.data(), 1, prompt.data());
    return prompt;
}

Tensor Maka::agglomerate(const ParameterStore& store, const Tensor& features,
                         const WavelengthSpec& spec, const TeacherTarget& target,
                         Cache* cache) const {
    if (features.rank() != 3 || features.dim(0) != cfg_.feature_dim) {
        fail_config("maka: feature shape " + shape_str(features.shape()));
    }
    const int d = cfg_.feature_dim;

    Tensor raw = encode_wavelengths(spec, cfg_.d_lambda, cfg_.pe_scale, cfg_.pe_temperature);
    Tensor mean_raw = mean_rows(raw);
    const Tensor& w_proj = store.value("maka.shared.w_proj");
    Tensor prompt({d});
    mm(w_proj.data(), d, cfg_.d_lambda, mean_raw.data(), 1, prompt.data());

    const Tensor& w_prompt = store.value(prompt_param(target.teacher_name));
    Tensor gamma_beta({2 * d});
    mm(w_prompt.data(), 2 * d, d, prompt.data(), 1, gamma_beta.data());
    Tensor gamma = Tensor::from({d}, {gamma_beta.raw().begin(), gamma_beta.raw().begin() + d});
    Tensor beta = Tensor::from({d}, {gamma_beta.raw().begin() + d, gamma_beta.raw().end()});

    Tensor resized = bilinear_resize(features, target.grid_h, target.grid_w);
    Tensor normed = layer_norm_chw(resized, cfg_.eps);
    const int hw = target.grid_h * target.grid_w;
    Tensor film_out(resized.shape());
    for (int c = 0; c < d; ++c) {
        const double g = gamma[static_cast<std::size_t>(c)];
        const double b = beta[static_cast<std::size_t>(c)];
        const double* in = normed.data() + static_cast<std::size_t>(c) * hw;
        double* o = film_out.data() + static_cast<std::size_t>(c) * hw;
        for (int p = 0; p < hw; ++p) o[p] = in[p] + g * in[p] + b;
    }

    // 1x1 convolution = channel mixing per position.
    const Tensor& pw = store.value(projector_weight_param(target.teacher_name));
    const Tensor& pb = store.value(projector_bias_param(target.teacher_name));
    Tensor projected({target.width, target.grid_h, target.grid_w});
    mm(pw.data(), target.width, d, film_out.data(), hw, projected.data());
    for (int t = 0; t < target.width; ++t) {
        double* row = projected.data() + static_cast<std::size_t>(t) * hw;
        const double b = pb[static_cast<std::size_t>(t)];
        for (int p = 0; p < hw; ++p) row[p] += b;
    }

    if (cache) {
        cache->mean_raw = std::move(mean_raw);
        cache->prompt = std::move(prompt);
        cache->gamma = std::move(gamma);
        cache->beta = std::move(beta);
        cache->resized = std::move(resized);
        cache->normed = std::move(normed);
        cache->film_out = std::move(film_out);
        cache->src_h = features.dim(1);
        cache->src_w = features.dim(2);
        cache->teacher_name = target.teacher_name;
    }
    return projected;
}

Tensor Maka::backward(ParameterStore& store, const Cache& cache, const Tensor& dprojected) const {
    const int d = cfg_.feature_dim;
    const int gh = cache.resized.dim(1), gw = cache.resized.dim(2);
    const int hw = gh * gw;
    const int width = dprojected.dim(0);

    const Tensor& pw = store.value(projector_weight_param(cache.teacher_name));
    Tensor& dpw = store.grad(projector_weight_param(cache.teacher_name));
    Tensor& dpb = store.grad(projector_bias_param(cache.teacher_name));

    // film_out viewed as (d x hw): dW += dY film^T, db += row sums, dfilm = W^T dY
    for (int t = 0; t < width; ++t) {
        const double* dyr = dprojected.data() + static_cast<std::size_t>(t) * hw;
        double s = 0.0;
        for (int p = 0; p < hw; ++p) s += dyr[p];
        dpb[static_cast<std::size_t>(t)] += s;
        const double* film = cache.film_out.data();
        double* dwr = dpw.data() + static_cast<std::size_t>(t) * d;
        for (int c = 0; c < d; ++c) {
            const double* fr = film + static_cast<std::size_t>(c) * hw;
            double acc = 0.0;
            for (int p = 0; p < hw; ++p) acc += dyr[p] * fr[p];
            dwr[c] += acc;
        }
    }
    Tensor dfilm({d, gh, gw});
    mm_at_acc(pw.data(), width, d, dprojected.data(), hw, dfilm.data());

    // F' = LN + gamma .* LN + beta
    Tensor dnormed({d, gh, gw});
    Tensor dgamma_beta({2 * d});
    for (int c = 0; c < d; ++c) {
        const double g = cache.gamma[static_cast<std::size_t>(c)];
        const double* df = dfilm.data() + static_cast<std::size_t>(c) * hw;
        const double* ln = cache.normed.data() + static_cast<std::size_t>(c) * hw;
        double* dn = dnormed.data() + static_cast<std::size_t>(c) * hw;
        double dg = 0.0, db = 0.0;
        for (int p = 0; p < hw; ++p) {
            dn[p] = df[p] * (1.0 + g);
            dg += df[p] * ln[p];
            db += df[p];
        }
        dgamma_beta[static_cast<std::size_t>(c)] = dg;
        dgamma_beta[static_cast<std::size_t>(d + c)] = db;
    }

    // Prompt path: [gamma; beta] = W_prompt V_p, V_p = W_proj mean_raw.
    const Tensor& w_prompt = store.value(prompt_param(cache.teacher_name));
    Tensor& dw_prompt = store.grad(prompt_param(cache.teacher_name));
    for (int i = 0; i < 2 * d; ++i) {
        const double g = dgamma_beta[static_cast<std::size_t>(i)];
        if (g == 0.0) continue;
        double* row = dw_prompt.data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < d; ++j) row[j] += g * cache.prompt[static_cast<std::size_t>(j)];
    }
    Tensor dprompt({d});
    mm_at_acc(w_prompt.data(), 2 * d, d, dgamma_beta.data(), 1, dprompt.data());
    Tensor& dw_proj = store.grad("maka.shared.w_proj");
    for (int i = 0; i < d; ++i) {
        const double g = dprompt[static_cast<std::size_t>(i)];
        if (g == 0.0) continue;
        double* row = dw_proj.data() + static_cast<std::size_t>(i) * cfg_.d_lambda;
        for (int j = 0; j < cfg_.d_lambda; ++j) {
            row[j] += g * cache.mean_raw[static_cast<std::size_t>(j)];
        }
    }

    Tensor dresized = layer_norm_chw_backward(cache.resized, dnormed, cfg_.eps);
    return bilinear_resize_backward(dresized, cache.src_h, cache.src_w);
}

}  // namespace spectra
