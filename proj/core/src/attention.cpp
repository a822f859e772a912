#include "spectra/attention.hpp"

#include <cmath>

#include "spectra/error.hpp"
#include "spectra/kernels.hpp"

namespace spectra {

Tensor normal_init(const std::vector<int>& shape, std::uint64_t seed, const std::string& name,
                   double sigma) {
    Rng rng(seed, "init/" + name);
    Tensor t(shape);
    for (std::size_t i = 0; i < t.numel(); ++i) t[i] = rng.normal(0.0, sigma);
    return t;
}

void register_linear(ParameterStore& store, const std::string& prefix, int out, int in,
                     std::uint64_t seed, double sigma) {
    store.add(prefix + ".w", normal_init({out, in}, seed, prefix + ".w", sigma));
    store.add(prefix + ".b", Tensor({out}));
}

AttentionBlock::AttentionBlock(std::string prefix, int dim, int heads, double eps)
    : prefix_(std::move(prefix)), dim_(dim), heads_(heads), eps_(eps) {
    if (heads < 1 || dim % heads != 0) {
        fail_config("attention block '" + prefix_ + "': dim " + std::to_string(dim) +
                    " not divisible by heads " + std::to_string(heads));
    }
    head_dim_ = dim / heads;
}

void AttentionBlock::register_params(ParameterStore& store, std::uint64_t seed) const {
    register_linear(store, name("q"), dim_, dim_, seed);
    register_linear(store, name("k"), dim_, dim_, seed);
    register_linear(store, name("v"), dim_, dim_, seed);
    register_linear(store, name("o"), dim_, dim_, seed);
    register_linear(store, name("fc1"), 4 * dim_, dim_, seed);
    register_linear(store, name("fc2"), dim_, 4 * dim_, seed);
}

namespace {

// Gathers head `h` (columns [h*hd, (h+1)*hd)) of an (n x d) matrix into a
// contiguous (n x hd) buffer.
void take_head(const Tensor& m, int h, int hd, Tensor& out) {
    const int n = m.dim(0), d = m.dim(1);
    for (int i = 0; i < n; ++i) {
        const double* src = m.data() + static_cast<std::size_t>(i) * d + h * hd;
        double* dst = out.data() + static_cast<std::size_t>(i) * hd;
        for (int j = 0; j < hd; ++j) dst[j] = src[j];
    }
}

void put_head(Tensor& m, int h, int hd, const Tensor& in) {
    const int n = m.dim(0), d = m.dim(1);
    for (int i = 0; i < n; ++i) {
        double* dst = m.data() + static_cast<std::size_t>(i) * d + h * hd;
        const double* src = in.data() + static_cast<std::size_t>(i) * hd;
        for (int j = 0; j < hd; ++j) dst[j] = src[j];
    }
}

void add_head(Tensor& m, int h, int hd, const Tensor& in) {
    const int n = m.dim(0), d = m.dim(1);
    for (int i = 0; i < n; ++i) {
        double* dst = m.data() + static_cast<std::size_t>(i) * d + h * hd;
        const double* src = in.data() + static_cast<std::size_t>(i) * hd;
        for (int j = 0; j < hd; ++j) dst[j] += src[j];
    }
}

}  // namespace

Tensor AttentionBlock::forward(const ParameterStore& store, const Tensor& x, Cache* cache) const {
    if (x.rank() != 2 || x.dim(1) != dim_) {
        fail_config("attention block '" + prefix_ + "': input shape " + shape_str(x.shape()));
    }
    const int n = x.dim(0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));

    Tensor h1 = layer_norm_rows(x, eps_);
    Tensor q = linear_forward(h1, store.value(name("q.w")), store.value(name("q.b")));
    Tensor k = linear_forward(h1, store.value(name("k.w")), store.value(name("k.b")));
    Tensor v = linear_forward(h1, store.value(name("v.w")), store.value(name("v.b")));

    Tensor probs({heads_ * n, n});
    Tensor attn_out({n, dim_});
    Tensor qh({n, head_dim_}), kh({n, head_dim_}), vh({n, head_dim_});
    for (int h = 0; h < heads_; ++h) {
        take_head(q, h, head_dim_, qh);
        take_head(k, h, head_dim_, kh);
        take_head(v, h, head_dim_, vh);
        Tensor scores({n, n});
        mm_bt(qh.data(), n, head_dim_, kh.data(), n, scores.data());
        for (std::size_t i = 0; i < scores.numel(); ++i) scores[i] *= scale;
        Tensor p = softmax_rows(scores);
        std::copy(p.data(), p.data() + p.numel(),
                  probs.data() + static_cast<std::size_t>(h) * n * n);
        Tensor oh({n, head_dim_});
        mm(p.data(), n, n, vh.data(), head_dim_, oh.data());
        put_head(attn_out, h, head_dim_, oh);
    }

    Tensor a = linear_forward(attn_out, store.value(name("o.w")), store.value(name("o.b")));
    Tensor x1 = x;
    axpy(x1, 1.0, a);

    Tensor h2 = layer_norm_rows(x1, eps_);
    Tensor u = linear_forward(h2, store.value(name("fc1.w")), store.value(name("fc1.b")));
    Tensor g = gelu_forward(u);
    Tensor m = linear_forward(g, store.value(name("fc2.w")), store.value(name("fc2.b")));
    Tensor y = x1;
    axpy(y, 1.0, m);

    if (cache) {
        cache->x = x;
        cache->h1 = std::move(h1);
        cache->q = std::move(q);
        cache->k = std::move(k);
        cache->v = std::move(v);
        cache->probs = std::move(probs);
        cache->attn_out = std::move(attn_out);
        cache->x1 = std::move(x1);
        cache->h2 = std::move(h2);
        cache->u = std::move(u);
        cache->g = std::move(g);
    }
    return y;
}

Tensor AttentionBlock::backward(ParameterStore& store, const Cache& cache, const Tensor& dy) const {
    const int n = cache.x.dim(0);
    const double scale = 1.0 / std::sqrt(static_cast<double>(head_dim_));

    // MLP branch: y = x1 + fc2(gelu(fc1(h2)))
    Tensor dg = linear_backward(cache.g, store.value(name("fc2.w")), dy,
                                store.grad(name("fc2.w")), store.grad(name("fc2.b")));
    Tensor du = gelu_backward(cache.u, dg);
    Tensor dh2 = linear_backward(cache.h2, store.value(name("fc1.w")), du,
                                 store.grad(name("fc1.w")), store.grad(name("fc1.b")));
    Tensor dx1 = layer_norm_rows_backward(cache.x1, dh2, eps_);
    axpy(dx1, 1.0, dy);  // residual

    // Attention branch: x1 = x + o(attn_out)
    Tensor dattn = linear_backward(cache.attn_out, store.value(name("o.w")), dx1,
                                   store.grad(name("o.w")), store.grad(name("o.b")));

    Tensor dq({n, dim_}), dk({n, dim_}), dv({n, dim_});
    Tensor qh({n, head_dim_}), kh({n, head_dim_}), vh({n, head_dim_}), doh({n, head_dim_});
    for (int h = 0; h < heads_; ++h) {
        take_head(cache.q, h, head_dim_, qh);
        take_head(cache.k, h, head_dim_, kh);
        take_head(cache.v, h, head_dim_, vh);
        take_head(dattn, h, head_dim_, doh);

        Tensor p({n, n});
        std::copy(cache.probs.data() + static_cast<std::size_t>(h) * n * n,
                  cache.probs.data() + static_cast<std::size_t>(h + 1) * n * n, p.data());

        // dV_h = P^T dO_h
        Tensor dvh({n, head_dim_});
        mm_at_acc(p.data(), n, n, doh.data(), head_dim_, dvh.data());
        // dP = dO_h V_h^T
        Tensor dp({n, n});
        mm_bt(doh.data(), n, head_dim_, vh.data(), n, dp.data());
        Tensor dscores = softmax_rows_backward(p, dp);
        for (std::size_t i = 0; i < dscores.numel(); ++i) dscores[i] *= scale;
        // dQ_h = dS K_h ; dK_h = dS^T Q_h
        Tensor dqh({n, head_dim_});
        mm(dscores.data(), n, n, kh.data(), head_dim_, dqh.data());
        Tensor dkh({n, head_dim_});
        mm_at_acc(dscores.data(), n, n, qh.data(), head_dim_, dkh.data());

        add_head(dq, h, head_dim_, dqh);
        add_head(dk, h, head_dim_, dkh);
        add_head(dv, h, head_dim_, dvh);
    }

    Tensor dh1 = linear_backward(cache.h1, store.value(name("q.w")), dq,
                                 store.grad(name("q.w")), store.grad(name("q.b")));
    axpy(dh1, 1.0,
         linear_backward(cache.h1, store.value(name("k.w")), dk, store.grad(name("k.w")),
                         store.grad(name("k.b"))));
    axpy(dh1, 1.0,
         linear_backward(cache.h1, store.value(name("v.w")), dv, store.grad(name("v.w")),
                         store.grad(name("v.b"))));

    Tensor dx = layer_norm_rows_backward(cache.x, dh1, eps_);
    axpy(dx, 1.0, dx1);  // residual
    return dx;
}

}  // namespace spectra
