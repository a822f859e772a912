#include "spectra/hypernet.hpp"

#include <cmath>

#include "spectra/error.hpp"
#include "spectra/kernels.hpp"

namespace spectra {

void validate_wavelengths(const WavelengthSpec& spec) {
    if (spec.lambdas.empty()) fail_config("wavelength spec '" + spec.modality_name + "' has no channels");
    for (double l : spec.lambdas) {
        if (!(l > 0.0)) fail_config("wavelength spec '" + spec.modality_name + "' has non-positive lambda");
    }
}

void validate_image(const MultimodalImage& img) {
    if (img.pixels.rank() != 3) fail_config("image pixels must be rank 3, got " + shape_str(img.pixels.shape()));
    validate_wavelengths(img.spec);
    if (img.channels() != img.spec.channels()) {
        fail_config("image channel count " + std::to_string(img.channels()) +
                    " does not match wavelength count " + std::to_string(img.spec.channels()));
    }
    ensure_finite(img.pixels, "image '" + img.spec.modality_name + "'");
}

Tensor encode_wavelengths(const WavelengthSpec& spec, int d_lambda, double scale,
                          double temperature) {
    validate_wavelengths(spec);
    if (d_lambda < 2 || d_lambda % 2 != 0) {
        fail_config("encode_wavelengths: d_lambda must be even and >= 2, got " +
                    std::to_string(d_lambda));
    }
    const int c = spec.channels();
    const int half = d_lambda / 2;
    Tensor raw({c, d_lambda});
    for (int i = 0; i < c; ++i) {
        const double pos = scale * spec.lambdas[static_cast<std::size_t>(i)];
        for (int k = 0; k < half; ++k) {
            const double freq = pos / std::pow(temperature, (2.0 * k) / d_lambda);
            raw.at2(i, 2 * k) = std::sin(freq);
            raw.at2(i, 2 * k + 1) = std::cos(freq);
        }
    }
    return raw;
}

Tensor transform_embeddings(const Tensor& raw, const Tensor& w1, const Tensor& b1,
                            const Tensor& w2, const Tensor& b2) {
    Tensor u = linear_forward(raw, w1, b1);
    Tensor g = gelu_forward(u);
    Tensor out = linear_forward(g, w2, b2);
    axpy(out, 1.0, raw);
    return out;
}

Hypernet::Hypernet(Config cfg, std::string prefix) : cfg_(cfg), prefix_(std::move(prefix)) {
    block_ = AttentionBlock(prefix_ + ".block", cfg_.d_lambda, cfg_.heads, cfg_.eps);
}

void Hypernet::register_params(ParameterStore& store, std::uint64_t seed) const {
    const int d = cfg_.d_lambda;
    register_linear(store, name("mlp1"), d, d, seed);
    register_linear(store, name("mlp2"), d, d, seed);
    store.add(name("weight_queries"), normal_init({cfg_.n_queries, d}, seed, name("weight_queries")));
    store.add(name("bias_query"), normal_init({1, d}, seed, name("bias_query")));
    block_.register_params(store, seed);
    const int kernel_len = cfg_.embed_dim * cfg_.patch * cfg_.patch;
    register_linear(store, name("head_w.fc1"), d, d, seed);
    register_linear(store, name("head_w.fc2"), kernel_len, d, seed);
    register_linear(store, name("head_b.fc1"), d, d, seed);
    register_linear(store, name("head_b.fc2"), cfg_.embed_dim, d, seed);
}

PatchKernels Hypernet::generate(const ParameterStore& store, const WavelengthSpec& spec,
                                Cache* cache) const {
    const int d = cfg_.d_lambda;
    const int c = spec.channels();
    const int nq = cfg_.n_queries;
    const int p = cfg_.patch;
    const int dim = cfg_.embed_dim;
    const int kernel_len = dim * p * p;

    Tensor raw = encode_wavelengths(spec, d, cfg_.pe_scale, cfg_.pe_temperature);

    Tensor u1 = linear_forward(raw, store.value(name("mlp1.w")), store.value(name("mlp1.b")));
    Tensor g1 = gelu_forward(u1);
    Tensor vprime = linear_forward(g1, store.value(name("mlp2.w")), store.value(name("mlp2.b")));
    axpy(vprime, 1.0, raw);

    // Token sequence: [weight queries ; transformed embeddings ; bias query]
    Tensor tokens_in({nq + c + 1, d});
    const Tensor& qw = store.value(name("weight_queries"));
    const Tensor& qb = store.value(name("bias_query"));
    std::copy(qw.data(), qw.data() + qw.numel(), tokens_in.data());
    std::copy(vprime.data(), vprime.data() + vprime.numel(),
              tokens_in.data() + static_cast<std::size_t>(nq) * d);
    std::copy(qb.data(), qb.data() + qb.numel(),
              tokens_in.data() + static_cast<std::size_t>(nq + c) * d);

    AttentionBlock::Cache block_cache;
    Tensor tokens_out = block_.forward(store, tokens_in, cache ? &block_cache : nullptr);

    // Wavelength-token outputs feed the weight head, one kernel slice per channel.
    Tensor hw_in({c, d});
    std::copy(tokens_out.data() + static_cast<std::size_t>(nq) * d,
              tokens_out.data() + static_cast<std::size_t>(nq + c) * d, hw_in.data());
    Tensor hw_u = linear_forward(hw_in, store.value(name("head_w.fc1.w")), store.value(name("head_w.fc1.b")));
    Tensor hw_g = gelu_forward(hw_u);
    Tensor slices = linear_forward(hw_g, store.value(name("head_w.fc2.w")), store.value(name("head_w.fc2.b")));

    Tensor hb_in({1, d});
    std::copy(tokens_out.data() + static_cast<std::size_t>(nq + c) * d,
              tokens_out.data() + static_cast<std::size_t>(nq + c + 1) * d, hb_in.data());
    Tensor hb_u = linear_forward(hb_in, store.value(name("head_b.fc1.w")), store.value(name("head_b.fc1.b")));
    Tensor hb_g = gelu_forward(hb_u);
    Tensor bias_row = linear_forward(hb_g, store.value(name("head_b.fc2.w")), store.value(name("head_b.fc2.b")));

    PatchKernels kernels;
    kernels.patch = p;
    kernels.embed_dim = dim;
    kernels.weights = Tensor({dim, c, p, p});
    kernels.bias = Tensor({dim});
    for (int ch = 0; ch < c; ++ch) {
        const double* row = slices.data() + static_cast<std::size_t>(ch) * kernel_len;
        for (int e = 0; e < dim; ++e) {
            for (int py = 0; py < p; ++py) {
                for (int px = 0; px < p; ++px) {
                    kernels.weights.at4(e, ch, py, px) = row[(e * p + py) * p + px];
                }
            }
        }
    }
    for (int e = 0; e < dim; ++e) kernels.bias[static_cast<std::size_t>(e)] = bias_row.at2(0, e);

    if (cache) {
        cache->raw = std::move(raw);
        cache->u1 = std::move(u1);
        cache->g1 = std::move(g1);
        cache->vprime = std::move(vprime);
        cache->tokens_in = std::move(tokens_in);
        cache->block = std::move(block_cache);
        cache->tokens_out = std::move(tokens_out);
        cache->hw_in = std::move(hw_in);
        cache->hw_u = std::move(hw_u);
        cache->hw_g = std::move(hw_g);
        cache->hb_in = std::move(hb_in);
        cache->hb_u = std::move(hb_u);
        cache->hb_g = std::move(hb_g);
        cache->channels = c;
    }
    return kernels;
}

void Hypernet::backward(ParameterStore& store, const Cache& cache, const Tensor& dweights,
                        const Tensor& dbias) const {
    const int d = cfg_.d_lambda;
    const int c = cache.channels;
    const int nq = cfg_.n_queries;
    const int p = cfg_.patch;
    const int dim = cfg_.embed_dim;
    const int kernel_len = dim * p * p;

    // Kernel-layout gradients back to head outputs.
    Tensor dslices({c, kernel_len});
    for (int ch = 0; ch < c; ++ch) {
        double* row = dslices.data() + static_cast<std::size_t>(ch) * kernel_len;
        for (int e = 0; e < dim; ++e) {
            for (int py = 0; py < p; ++py) {
                for (int px = 0; px < p; ++px) {
                    row[(e * p + py) * p + px] = dweights.at4(e, ch, py, px);
                }
            }
        }
    }
    Tensor dbias_row({1, dim});
    for (int e = 0; e < dim; ++e) dbias_row.at2(0, e) = dbias[static_cast<std::size_t>(e)];

    Tensor dhw_g = linear_backward(cache.hw_g, store.value(name("head_w.fc2.w")), dslices,
                                   store.grad(name("head_w.fc2.w")), store.grad(name("head_w.fc2.b")));
    Tensor dhw_u = gelu_backward(cache.hw_u, dhw_g);
    Tensor dhw_in = linear_backward(cache.hw_in, store.value(name("head_w.fc1.w")), dhw_u,
                                    store.grad(name("head_w.fc1.w")), store.grad(name("head_w.fc1.b")));

    Tensor dhb_g = linear_backward(cache.hb_g, store.value(name("head_b.fc2.w")), dbias_row,
                                   store.grad(name("head_b.fc2.w")), store.grad(name("head_b.fc2.b")));
    Tensor dhb_u = gelu_backward(cache.hb_u, dhb_g);
    Tensor dhb_in = linear_backward(cache.hb_in, store.value(name("head_b.fc1.w")), dhb_u,
                                    store.grad(name("head_b.fc1.w")), store.grad(name("head_b.fc1.b")));

    // Weight-query outputs are discarded, so their output grads are zero.
    Tensor dtokens_out({nq + c + 1, d});
    std::copy(dhw_in.data(), dhw_in.data() + dhw_in.numel(),
              dtokens_out.data() + static_cast<std::size_t>(nq) * d);
    std::copy(dhb_in.data(), dhb_in.data() + dhb_in.numel(),
              dtokens_out.data() + static_cast<std::size_t>(nq + c) * d);

    Tensor dtokens_in = block_.backward(store, cache.block, dtokens_out);

    Tensor& dqw = store.grad(name("weight_queries"));
    for (std::size_t i = 0; i < dqw.numel(); ++i) dqw[i] += dtokens_in[i];
    Tensor& dqb = store.grad(name("bias_query"));
    for (int j = 0; j < d; ++j) {
        dqb[static_cast<std::size_t>(j)] += dtokens_in.at2(nq + c, j);
    }

    Tensor dvprime({c, d});
    std::copy(dtokens_in.data() + static_cast<std::size_t>(nq) * d,
              dtokens_in.data() + static_cast<std::size_t>(nq + c) * d, dvprime.data());

    // Residual MLP; raw is a pure function of the wavelengths, nothing below.
    Tensor dg1 = linear_backward(cache.g1, store.value(name("mlp2.w")), dvprime,
                                 store.grad(name("mlp2.w")), store.grad(name("mlp2.b")));
    Tensor du1 = gelu_backward(cache.u1, dg1);
    (void)linear_backward(cache.raw, store.value(name("mlp1.w")), du1,
                          store.grad(name("mlp1.w")), store.grad(name("mlp1.b")));
}

Tensor dynamic_patch_embed(const Tensor& pixels, const PatchKernels& kernels) {
    if (pixels.rank() != 3) fail_config("dynamic_patch_embed: pixels must be rank 3");
    const int c = pixels.dim(0), h = pixels.dim(1), w = pixels.dim(2);
    const int p = kernels.patch, dim = kernels.embed_dim;
    if (kernels.channels() != c) {
        fail_config("dynamic_patch_embed: kernel channels " + std::to_string(kernels.channels()) +
                    " != image channels " + std::to_string(c));
    }
    if (h % p != 0 || w % p != 0) {
        fail_config("dynamic_patch_embed: image " + std::to_string(h) + "x" + std::to_string(w) +
                    " not divisible by patch " + std::to_string(p));
    }
    const int gh = h / p, gw = w / p;
    Tensor tokens({gh * gw, dim});
    for (int gy = 0; gy < gh; ++gy) {
        for (int gx = 0; gx < gw; ++gx) {
            double* tok = tokens.data() + static_cast<std::size_t>(gy * gw + gx) * dim;
            for (int e = 0; e < dim; ++e) {
                double s = kernels.bias[static_cast<std::size_t>(e)];
                for (int ch = 0; ch < c; ++ch) {
                    for (int py = 0; py < p; ++py) {
                        const double* img_row = pixels.data() +
                                                (static_cast<std::size_t>(ch) * h + gy * p + py) * w +
                                                gx * p;
                        const double* ker_row = kernels.weights.data() +
                                                ((static_cast<std::size_t>(e) * c + ch) * p + py) * p;
                        for (int px = 0; px < p; ++px) s += ker_row[px] * img_row[px];
                    }
                }
                tok[e] = s;
            }
        }
    }
    return tokens;
}

PatchEmbedGrads dynamic_patch_embed_backward(const Tensor& pixels, const PatchKernels& kernels,
                                             const Tensor& dtokens) {
    const int c = pixels.dim(0), h = pixels.dim(1), w = pixels.dim(2);
    const int p = kernels.patch, dim = kernels.embed_dim;
    const int gh = h / p, gw = w / p;
    PatchEmbedGrads grads;
    grads.dweights = Tensor(kernels.weights.shape());
    grads.dbias = Tensor(kernels.bias.shape());
    grads.dpixels = Tensor(pixels.shape());
    for (int gy = 0; gy < gh; ++gy) {
        for (int gx = 0; gx < gw; ++gx) {
            const double* dtok = dtokens.data() + static_cast<std::size_t>(gy * gw + gx) * dim;
            for (int e = 0; e < dim; ++e) {
                const double g = dtok[e];
                if (g == 0.0) continue;
                grads.dbias[static_cast<std::size_t>(e)] += g;
                for (int ch = 0; ch < c; ++ch) {
                    for (int py = 0; py < p; ++py) {
                        const std::size_t img_off =
                            (static_cast<std::size_t>(ch) * h + gy * p + py) * w + gx * p;
                        const std::size_t ker_off =
                            ((static_cast<std::size_t>(e) * c + ch) * p + py) * p;
                        const double* img_row = pixels.data() + img_off;
                        const double* ker_row = kernels.weights.data() + ker_off;
                        double* dker_row = grads.dweights.data() + ker_off;
                        double* dimg_row = grads.dpixels.data() + img_off;
                        for (int px = 0; px < p; ++px) {
                            dker_row[px] += g * img_row[px];
                            dimg_row[px] += g * ker_row[px];
                        }
                    }
                }
            }
        }
    }
    return grads;
}

}  // namespace spectra
