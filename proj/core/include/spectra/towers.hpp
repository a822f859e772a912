#pragma once

#include <string>
#include <vector>

#include "spectra/attention.hpp"
#include "spectra/hypernet.hpp"
#include "spectra/image.hpp"

namespace spectra {

/// Hashed token ids, at most `max` of them; ids lie in [0, buckets).
struct TextTokens {
    std::vector<int> ids;
    int length = 0;
};

/// Lowercases, splits on anything non-alphanumeric, hashes each word into
/// `buckets` buckets with a stable 64-bit hash, truncates to `max_tokens`.
TextTokens tokenize(const std::string& caption, int buckets = 4096, int max_tokens = 32);

/// Paired unit-norm embedding matrices; row i of one matches row i of the other.
struct EmbeddingBatch {
    Tensor image_embeds;  // (n x d_e)
    Tensor text_embeds;   // (n x d_e)

    int pairs() const { return image_embeds.rank() == 2 ? image_embeds.dim(0) : 0; }
};

/// Asserts every row has unit L2 norm within tol.
void validate_embedding_batch(const EmbeddingBatch& batch, double tol = 1e-9);

/// Text transformer: embedding + learned positions, pre-norm blocks over the
/// real tokens only, mean pool, projection, L2 normalization.
class TextTower {
public:
    struct Config {
        int dim = 64;
        int blocks = 2;
        int heads = 4;
        int vocab = 4096;
        int max_tokens = 32;
        int embed_dim = 32;
        double eps = 1e-6;
    };

    TextTower() = default;
    explicit TextTower(Config cfg);

    void register_params(ParameterStore& store, std::uint64_t seed) const;

    struct Cache {
        std::vector<int> rows;  // embedding rows actually used
        Tensor x0;
        std::vector<AttentionBlock::Cache> blocks;
        Tensor last;
        Tensor pooled;      // (1 x dim)
        Tensor normed;      // layer-normalized pooled vector
        Tensor projected;   // (embed_dim), pre-normalization
    };

    /// Unit embedding of shape (embed_dim).
    Tensor encode(const ParameterStore& store, const TextTokens& tokens, Cache* cache = nullptr) const;

    void backward(ParameterStore& store, const Cache& cache, const Tensor& dembedding) const;

    const Config& config() const { return cfg_; }

private:
    Config cfg_;
    std::vector<AttentionBlock> blocks_;
};

/// Vision transformer fed by hypernet-generated patch embeddings. Produces
/// the pooled joint embedding and the last-block feature grid.
class VisionTower {
public:
    struct Config {
        int image_size = 64;
        int patch = 8;
        int dim = 64;
        int blocks = 4;
        int heads = 4;
        int embed_dim = 32;
        double eps = 1e-6;
        Hypernet::Config hyper;
    };

    VisionTower() = default;
    explicit VisionTower(Config cfg);

    void register_params(ParameterStore& store, std::uint64_t seed) const;

    struct Cache {
        Hypernet::Cache hyper;
        PatchKernels kernels;
        Tensor pixels;
        Tensor tokens0;
        std::vector<AttentionBlock::Cache> blocks;
        Tensor last;       // final tokens (n x dim)
        Tensor pooled;     // (1 x dim)
        Tensor normed;     // layer-normalized pooled vector
        Tensor projected;  // (embed_dim), pre-normalization
    };

    struct Output {
        Tensor embedding;  // unit (embed_dim)
        Tensor features;   // (dim x grid x grid)
    };

    Output encode(const ParameterStore& store, const MultimodalImage& img, Cache* cache = nullptr) const;

    /// Same forward but with externally generated patch kernels; lets callers
    /// share one hypernet pass across same-wavelength batch members.
    Output encode_with_kernels(const ParameterStore& store, const MultimodalImage& img,
                               const PatchKernels& kernels, Cache* cache = nullptr) const;

    /// Either gradient may be empty (treated as zero): dembedding is
    /// (embed_dim), dfeatures is (dim x grid x grid).
    void backward(ParameterStore& store, const Cache& cache, const Tensor& dembedding,
                  const Tensor& dfeatures) const;

    /// Backward stopping at the kernel boundary: parameter grads inside the
    /// tower accumulate into the store, kernel-space grads into the provided
    /// buffers (shaped like PatchKernels weights/bias).
    void backward_to_kernels(ParameterStore& store, const Cache& cache, const Tensor& dembedding,
                             const Tensor& dfeatures, Tensor& dkernel_weights,
                             Tensor& dkernel_bias) const;

    int grid() const { return cfg_.image_size / cfg_.patch; }
    const Config& config() const { return cfg_; }
    const Hypernet& hypernet() const { return hyper_; }

private:
    Config cfg_;
    Hypernet hyper_;
    std::vector<AttentionBlock> blocks_;
};

}  // namespace spectra
