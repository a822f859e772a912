#pragma once

#include <string>

#include "spectra/attention.hpp"
#include "spectra/image.hpp"
#include "spectra/tensor.hpp"

namespace spectra {

/// Sine-cosine positional encoding of wavelengths: row c holds interleaved
/// [sin(s*l_c / T^(2k/d)), cos(s*l_c / T^(2k/d))] for k = 0 .. d/2-1, with
/// scale s = 1000 (micrometers in, effectively nanometers inside) and
/// temperature T = 10000. Deterministic and non-trainable.
Tensor encode_wavelengths(const WavelengthSpec& spec, int d_lambda, double scale = 1000.0,
                          double temperature = 10000.0);

/// Row-wise residual MLP: raw + fc2(gelu(fc1(raw))).
Tensor transform_embeddings(const Tensor& raw, const Tensor& w1, const Tensor& b1,
                            const Tensor& w2, const Tensor& b2);

/// Dynamically generated patch-embedding weights for one wavelength set.
struct PatchKernels {
    Tensor weights;  // (embed_dim x channels x patch x patch)
    Tensor bias;     // (embed_dim)
    int patch = 0;
    int embed_dim = 0;

    int channels() const { return weights.rank() == 4 ? weights.dim(1) : 0; }
};

/// Generates per-modality patch-embedding kernels from channel wavelengths:
/// encodes the wavelengths, transforms them with a residual MLP, runs the
/// sequence [weight queries ; transformed embeddings ; bias query] through a
/// transformer block (no token-index positions, so jointly permuting channels
/// and wavelengths permutes the kernel slices), and maps the wavelength-token
/// outputs through a two-layer head to one kernel slice per channel. The bias
/// query's output maps to the shared bias; weight-query outputs provide
/// attention context only and are discarded.
class Hypernet {
public:
    struct Config {
        int d_lambda = 128;
        int heads = 4;
        int n_queries = 16;
        int patch = 8;
        int embed_dim = 64;
        double pe_scale = 1000.0;
        double pe_temperature = 10000.0;
        double eps = 1e-6;
    };

    Hypernet() = default;
    explicit Hypernet(Config cfg, std::string prefix = "hypernet");

    void register_params(ParameterStore& store, std::uint64_t seed) const;

    struct Cache {
        Tensor raw;      // (c x d_lambda)
        Tensor u1, g1;   // residual MLP intermediates
        Tensor vprime;   // transformed embeddings
        Tensor tokens_in;
        AttentionBlock::Cache block;
        Tensor tokens_out;
        Tensor hw_in, hw_u, hw_g;  // weight-head intermediates over the c rows
        Tensor hb_in, hb_u, hb_g;  // bias-head intermediates (1 row)
        int channels = 0;
    };

    PatchKernels generate(const ParameterStore& store, const WavelengthSpec& spec,
                          Cache* cache = nullptr) const;

    /// Accumulates parameter gradients given kernel-space gradients.
    void backward(ParameterStore& store, const Cache& cache, const Tensor& dweights,
                  const Tensor& dbias) const;

    const Config& config() const { return cfg_; }
    const std::string& prefix() const { return prefix_; }

private:
    Config cfg_;
    std::string prefix_;
    AttentionBlock block_;

    std::string name(const char* leaf) const { return prefix_ + "." + leaf; }
};

/// Non-overlapping patch convolution, stride = patch size: token (gy, gx) is
/// <kernel, patch> + bias per embedding dim. Returns (gh*gw x embed_dim)
/// tokens in row-major grid order. H and W must be divisible by the patch
/// size; there is no implicit padding.
Tensor dynamic_patch_embed(const Tensor& pixels, const PatchKernels& kernels);

struct PatchEmbedGrads {
    Tensor dweights;  // same shape as kernels.weights
    Tensor dbias;
    Tensor dpixels;
};

PatchEmbedGrads dynamic_patch_embed_backward(const Tensor& pixels, const PatchKernels& kernels,
                                             const Tensor& dtokens);

}  // namespace spectra
