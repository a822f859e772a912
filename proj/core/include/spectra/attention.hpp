#pragma once

#include <string>

#include "spectra/rng.hpp"
#include "spectra/tensor.hpp"

namespace spectra {

/// Pre-norm multi-head self-attention + GELU MLP (expansion x4), residual on
/// both branches. No positional information is added inside the block, so it
/// is permutation-equivariant over tokens. Parameters live in a
/// ParameterStore under `prefix.`; the block itself only keeps names.
class AttentionBlock {
public:
    AttentionBlock() = default;
    AttentionBlock(std::string prefix, int dim, int heads, double eps = 1e-6);

    /// Registers q/k/v/o projections and the two MLP layers.
    void register_params(ParameterStore& store, std::uint64_t seed) const;

    struct Cache {
        Tensor x;        // block input (n x d)
        Tensor h1;       // LN(x)
        Tensor q, k, v;  // projections
        Tensor probs;    // per-head softmax rows, stacked (heads*n x n)
        Tensor attn_out; // concatenated head outputs (n x d)
        Tensor x1;       // x + O Wo^T + bo
        Tensor h2;       // LN(x1)
        Tensor u;        // pre-GELU (n x 4d)
        Tensor g;        // GELU(u)
    };

    Tensor forward(const ParameterStore& store, const Tensor& x, Cache* cache = nullptr) const;

    /// Accumulates parameter grads into the store and returns dX.
    Tensor backward(ParameterStore& store, const Cache& cache, const Tensor& dy) const;

    int dim() const { return dim_; }
    int heads() const { return heads_; }
    const std::string& prefix() const { return prefix_; }

private:
    std::string prefix_;
    int dim_ = 0;
    int heads_ = 0;
    int head_dim_ = 0;
    double eps_ = 1e-6;

    std::string name(const char* leaf) const { return prefix_ + "." + leaf; }
};

/// Registers an (out x in) weight with N(0, sigma) entries and a zero bias
/// under `<prefix>.w` / `<prefix>.b`. Init draws come from a sub-stream named
/// after the parameter, so values do not depend on registration order.
void register_linear(ParameterStore& store, const std::string& prefix, int out, int in,
                     std::uint64_t seed, double sigma = 0.02);

/// N(0, 0.02) tensor from the sub-stream named `name`.
Tensor normal_init(const std::vector<int>& shape, std::uint64_t seed, const std::string& name,
                   double sigma = 0.02);

}  // namespace spectra
