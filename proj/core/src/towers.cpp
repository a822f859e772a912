#include "spectra/towers.hpp"

#include <cctype>
#include <cmath>

#include "spectra/error.hpp"
#include "spectra/kernels.hpp"
#include "spectra/rng.hpp"

namespace spectra {

TextTokens tokenize(const std::string& caption, int buckets, int max_tokens) {
    if (caption.empty()) fail_config("tokenize: empty caption");
    TextTokens tokens;
    std::string word;
    auto flush = [&]() {
        if (word.empty()) return;
        if (tokens.length < max_tokens) {
            tokens.ids.push_back(static_cast<int>(fnv1a64(word) % static_cast<std::uint64_t>(buckets)));
            ++tokens.length;
        }
        word.clear();
    };
    for (char raw : caption) {
        const unsigned char c = static_cast<unsigned char>(raw);
        if (std::isalnum(c)) {
            word.push_back(static_cast<char>(std::tolower(c)));
        } else {
            flush();
        }
    }
    flush();
    if (tokens.length == 0) fail_config("tokenize: caption has no tokens: '" + caption + "'");
    return tokens;
}

void validate_embedding_batch(const EmbeddingBatch& batch, double tol) {
    if (!batch.image_embeds.same_shape(batch.text_embeds)) {
        fail_config("embedding batch: image/text shape mismatch");
    }
    const int n = batch.pairs(), d = batch.image_embeds.dim(1);
    for (const Tensor* m : {&batch.image_embeds, &batch.text_embeds}) {
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            const double* row = m->data() + static_cast<std::size_t>(i) * d;
            for (int j = 0; j < d; ++j) s += row[j] * row[j];
            if (std::fabs(std::sqrt(s) - 1.0) > tol) {
                fail_numeric("embedding batch row " + std::to_string(i) + " norm " +
                             std::to_string(std::sqrt(s)) + " not unit");
            }
        }
    }
}

TextTower::TextTower(Config cfg) : cfg_(cfg) {
    for (int b = 0; b < cfg_.blocks; ++b) {
        blocks_.emplace_back("text.block" + std::to_string(b), cfg_.dim, cfg_.heads, cfg_.eps);
    }
}

void TextTower::register_params(ParameterStore& store, std::uint64_t seed) const {
    store.add("text.embed", normal_init({cfg_.vocab, cfg_.dim}, seed, "text.embed"));
    store.add("text.pos", normal_init({cfg_.max_tokens, cfg_.dim}, seed, "text.pos"));
    for (const auto& b : blocks_) b.register_params(store, seed);
    register_linear(store, "proj.text", cfg_.embed_dim, cfg_.dim, seed,
                    1.0 / std::sqrt(static_cast<double>(cfg_.dim)));
}

Tensor TextTower::encode(const ParameterStore& store, const TextTokens& tokens, Cache* cache) const {
    if (tokens.length < 1) fail_config("text tower: empty token list");
    const int n = std::min(tokens.length, cfg_.max_tokens);
    const int d = cfg_.dim;
    const Tensor& embed = store.value("text.embed");
    const Tensor& pos = store.value("text.pos");

    Tensor x({n, d});
    std::vector<int> rows(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const int id = tokens.ids[static_cast<std::size_t>(i)];
        if (id < 0) fail_config("text tower: negative token id");
        const int row = id % cfg_.vocab;
        rows[static_cast<std::size_t>(i)] = row;
        const double* er = embed.data() + static_cast<std::size_t>(row) * d;
        const double* pr = pos.data() + static_cast<std::size_t>(i) * d;
        double* xr = x.data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < d; ++j) xr[j] = er[j] + pr[j];
    }

    std::vector<AttentionBlock::Cache> block_caches(cache ? blocks_.size() : 0);
    Tensor h = x;
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        h = blocks_[b].forward(store, h, cache ? &block_caches[b] : nullptr);
    }

    Tensor pooled_vec = mean_rows(h);
    Tensor pooled = Tensor::from({1, d}, pooled_vec.raw());
    // Final norm keeps the projection input at unit scale for any tower state.
    Tensor normed = layer_norm_rows(pooled, cfg_.eps);
    Tensor projected_row = linear_forward(normed, store.value("proj.text.w"), store.value("proj.text.b"));
    Tensor projected = Tensor::from({cfg_.embed_dim}, projected_row.raw());
    Tensor out = l2_normalize(projected);

    if (cache) {
        cache->rows = std::move(rows);
        cache->x0 = std::move(x);
        cache->blocks = std::move(block_caches);
        cache->last = std::move(h);
        cache->pooled = std::move(pooled);
        cache->normed = std::move(normed);
        cache->projected = std::move(projected);
    }
    return out;
}

void TextTower::backward(ParameterStore& store, const Cache& cache, const Tensor& dembedding) const {
    const int n = cache.x0.dim(0), d = cfg_.dim;

    Tensor dproj = l2_normalize_backward(cache.projected, dembedding);
    Tensor dproj_row = Tensor::from({1, cfg_.embed_dim}, dproj.raw());
    Tensor dnormed = linear_backward(cache.normed, store.value("proj.text.w"), dproj_row,
                                     store.grad("proj.text.w"), store.grad("proj.text.b"));
    Tensor dpooled_row = layer_norm_rows_backward(cache.pooled, dnormed, cfg_.eps);

    Tensor dh({n, d});
    Tensor dpooled = Tensor::from({d}, dpooled_row.raw());
    mean_rows_backward(dpooled, n, n, dh);

    for (std::size_t b = blocks_.size(); b-- > 0;) {
        dh = blocks_[b].backward(store, cache.blocks[b], dh);
    }

    Tensor& dembed = store.grad("text.embed");
    Tensor& dpos = store.grad("text.pos");
    for (int i = 0; i < n; ++i) {
        const int row = cache.rows[static_cast<std::size_t>(i)];
        const double* g = dh.data() + static_cast<std::size_t>(i) * d;
        double* er = dembed.data() + static_cast<std::size_t>(row) * d;
        double* pr = dpos.data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < d; ++j) {
            er[j] += g[j];
            pr[j] += g[j];
        }
    }
}

VisionTower::VisionTower(Config cfg) : cfg_(cfg) {
    cfg_.hyper.patch = cfg_.patch;
    cfg_.hyper.embed_dim = cfg_.dim;
    hyper_ = Hypernet(cfg_.hyper);
    for (int b = 0; b < cfg_.blocks; ++b) {
        blocks_.emplace_back("vision.block" + std::to_string(b), cfg_.dim, cfg_.heads, cfg_.eps);
    }
}

void VisionTower::register_params(ParameterStore& store, std::uint64_t seed) const {
    hyper_.register_params(store, seed);
    const int g = grid();
    store.add("vision.pos", normal_init({g * g, cfg_.dim}, seed, "vision.pos"));
    for (const auto& b : blocks_) b.register_params(store, seed);
    register_linear(store, "proj.image", cfg_.embed_dim, cfg_.dim, seed,
                    1.0 / std::sqrt(static_cast<double>(cfg_.dim)));
}

VisionTower::Output VisionTower::encode(const ParameterStore& store, const MultimodalImage& img,
                                        Cache* cache) const {
    Hypernet::Cache hyper_cache;
    PatchKernels kernels = hyper_.generate(store, img.spec, cache ? &hyper_cache : nullptr);
    Output out = encode_with_kernels(store, img, kernels, cache);
    if (cache) cache->hyper = std::move(hyper_cache);
    return out;
}

VisionTower::Output VisionTower::encode_with_kernels(const ParameterStore& store,
                                                     const MultimodalImage& img,
                                                     const PatchKernels& kernels,
                                                     Cache* cache) const {
    validate_image(img);
    const int h = img.height(), w = img.width();
    if (h != cfg_.image_size || w != cfg_.image_size) {
        fail_config("vision tower expects " + std::to_string(cfg_.image_size) + "x" +
                    std::to_string(cfg_.image_size) + " images, got " + std::to_string(h) + "x" +
                    std::to_string(w));
    }

    Tensor tokens = dynamic_patch_embed(img.pixels, kernels);

    const Tensor& pos = store.value("vision.pos");
    axpy(tokens, 1.0, pos);
    Tensor tokens0 = cache ? tokens : Tensor();

    std::vector<AttentionBlock::Cache> block_caches(cache ? blocks_.size() : 0);
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
        tokens = blocks_[b].forward(store, tokens, cache ? &block_caches[b] : nullptr);
    }

    const int g = grid();
    const int n = g * g;
    Output out;
    out.features = Tensor({cfg_.dim, g, g});
    for (int i = 0; i < n; ++i) {
        const double* tok = tokens.data() + static_cast<std::size_t>(i) * cfg_.dim;
        for (int j = 0; j < cfg_.dim; ++j) out.features[static_cast<std::size_t>(j) * n + i] = tok[j];
    }

    Tensor pooled_vec = mean_rows(tokens);
    Tensor pooled = Tensor::from({1, cfg_.dim}, pooled_vec.raw());
    Tensor normed = layer_norm_rows(pooled, cfg_.eps);
    Tensor projected_row = linear_forward(normed, store.value("proj.image.w"), store.value("proj.image.b"));
    Tensor projected = Tensor::from({cfg_.embed_dim}, projected_row.raw());
    out.embedding = l2_normalize(projected);

    if (cache) {
        cache->kernels = kernels;
        cache->pixels = img.pixels;
        cache->tokens0 = std::move(tokens0);
        cache->blocks = std::move(block_caches);
        cache->last = std::move(tokens);
        cache->pooled = std::move(pooled);
        cache->normed = std::move(normed);
        cache->projected = std::move(projected);
    }
    return out;
}

void VisionTower::backward(ParameterStore& store, const Cache& cache, const Tensor& dembedding,
                           const Tensor& dfeatures) const {
    Tensor dw(cache.kernels.weights.shape());
    Tensor db(cache.kernels.bias.shape());
    backward_to_kernels(store, cache, dembedding, dfeatures, dw, db);
    hyper_.backward(store, cache.hyper, dw, db);
}

void VisionTower::backward_to_kernels(ParameterStore& store, const Cache& cache,
                                      const Tensor& dembedding, const Tensor& dfeatures,
                                      Tensor& dkernel_weights, Tensor& dkernel_bias) const {
    const int g = grid();
    const int n = g * g;
    const int d = cfg_.dim;

    Tensor dtokens({n, d});
    if (!dfeatures.empty()) {
        for (int i = 0; i < n; ++i) {
            double* row = dtokens.data() + static_cast<std::size_t>(i) * d;
            for (int j = 0; j < d; ++j) row[j] += dfeatures[static_cast<std::size_t>(j) * n + i];
        }
    }
    if (!dembedding.empty()) {
        Tensor dproj = l2_normalize_backward(cache.projected, dembedding);
        Tensor dproj_row = Tensor::from({1, cfg_.embed_dim}, dproj.raw());
        Tensor dnormed = linear_backward(cache.normed, store.value("proj.image.w"), dproj_row,
                                         store.grad("proj.image.w"), store.grad("proj.image.b"));
        Tensor dpooled_row = layer_norm_rows_backward(cache.pooled, dnormed, cfg_.eps);
        Tensor dpooled = Tensor::from({d}, dpooled_row.raw());
        mean_rows_backward(dpooled, n, n, dtokens);
    }

    for (std::size_t b = blocks_.size(); b-- > 0;) {
        dtokens = blocks_[b].backward(store, cache.blocks[b], dtokens);
    }

    axpy(store.grad("vision.pos"), 1.0, dtokens);

    PatchEmbedGrads pe = dynamic_patch_embed_backward(cache.pixels, cache.kernels, dtokens);
    axpy(dkernel_weights, 1.0, pe.dweights);
    axpy(dkernel_bias, 1.0, pe.dbias);
}

}  // namespace spectra
