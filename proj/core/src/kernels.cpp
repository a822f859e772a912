#include "spectra/kernels.hpp"

#include <cmath>
#include <cstring>

#include "spectra/error.hpp"

namespace spectra {

void mm(const double* a, int m, int k, const double* b, int n, double* c) {
    std::memset(c, 0, sizeof(double) * static_cast<std::size_t>(m) * n);
    mm_acc(a, m, k, b, n, c);
}

void mm_acc(const double* a, int m, int k, const double* b, int n, double* c) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<std::size_t>(i) * k;
        double* ci = c + static_cast<std::size_t>(i) * n;
        for (int kk = 0; kk < k; ++kk) {
            const double av = ai[kk];
            if (av == 0.0) continue;
            const double* bk = b + static_cast<std::size_t>(kk) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bk[j];
        }
    }
}

void mm_bt(const double* a, int m, int k, const double* b, int n, double* c) {
    for (int i = 0; i < m; ++i) {
        const double* ai = a + static_cast<std::size_t>(i) * k;
        double* ci = c + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            const double* bj = b + static_cast<std::size_t>(j) * k;
            double s = 0.0;
            for (int kk = 0; kk < k; ++kk) s += ai[kk] * bj[kk];
            ci[j] = s;
        }
    }
}

void mm_at_acc(const double* a, int k, int m, const double* b, int n, double* c) {
    for (int kk = 0; kk < k; ++kk) {
        const double* ak = a + static_cast<std::size_t>(kk) * m;
        const double* bk = b + static_cast<std::size_t>(kk) * n;
        for (int i = 0; i < m; ++i) {
            const double av = ak[i];
            if (av == 0.0) continue;
            double* ci = c + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) ci[j] += av * bk[j];
        }
    }
}

Tensor linear_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
    const int n = x.dim(0), in = x.dim(1);
    const int out = w.dim(0);
    if (w.dim(1) != in) fail_config("linear: weight in-dim mismatch");
    if (b.numel() != static_cast<std::size_t>(out)) fail_config("linear: bias dim mismatch");
    Tensor y({n, out});
    mm_bt(x.data(), n, in, w.data(), out, y.data());
    for (int i = 0; i < n; ++i) {
        double* yi = y.data() + static_cast<std::size_t>(i) * out;
        for (int j = 0; j < out; ++j) yi[j] += b[static_cast<std::size_t>(j)];
    }
    return y;
}

Tensor linear_backward(const Tensor& x, const Tensor& w, const Tensor& dy,
                       Tensor& dw_acc, Tensor& db_acc) {
    const int n = x.dim(0), in = x.dim(1), out = w.dim(0);
    // dW += dY^T X, db += column sums of dY, dX = dY W
    mm_at_acc(dy.data(), n, out, x.data(), in, dw_acc.data());
    for (int i = 0; i < n; ++i) {
        const double* dyi = dy.data() + static_cast<std::size_t>(i) * out;
        for (int j = 0; j < out; ++j) db_acc[static_cast<std::size_t>(j)] += dyi[j];
    }
    Tensor dx({n, in});
    mm(dy.data(), n, out, w.data(), in, dx.data());
    return dx;
}

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

double gelu(double x) { return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2)); }

double gelu_derivative(double x) {
    return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * kInvSqrt2Pi * std::exp(-0.5 * x * x);
}

Tensor gelu_forward(const Tensor& x) {
    Tensor y(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) y[i] = gelu(x[i]);
    return y;
}

Tensor gelu_backward(const Tensor& x, const Tensor& dy) {
    Tensor dx(x.shape());
    for (std::size_t i = 0; i < x.numel(); ++i) dx[i] = dy[i] * gelu_derivative(x[i]);
    return dx;
}

Tensor softmax_rows(const Tensor& s) {
    const int n = s.dim(0), m = s.dim(1);
    Tensor p({n, m});
    for (int i = 0; i < n; ++i) {
        const double* si = s.data() + static_cast<std::size_t>(i) * m;
        double* pi = p.data() + static_cast<std::size_t>(i) * m;
        double mx = si[0];
        for (int j = 1; j < m; ++j) mx = std::max(mx, si[j]);
        double sum = 0.0;
        for (int j = 0; j < m; ++j) {
            pi[j] = std::exp(si[j] - mx);
            sum += pi[j];
        }
        const double inv = 1.0 / sum;
        for (int j = 0; j < m; ++j) pi[j] *= inv;
    }
    return p;
}

Tensor softmax_rows_backward(const Tensor& p, const Tensor& dp) {
    const int n = p.dim(0), m = p.dim(1);
    Tensor ds({n, m});
    for (int i = 0; i < n; ++i) {
        const double* pi = p.data() + static_cast<std::size_t>(i) * m;
        const double* dpi = dp.data() + static_cast<std::size_t>(i) * m;
        double* dsi = ds.data() + static_cast<std::size_t>(i) * m;
        double dot = 0.0;
        for (int j = 0; j < m; ++j) dot += dpi[j] * pi[j];
        for (int j = 0; j < m; ++j) dsi[j] = pi[j] * (dpi[j] - dot);
    }
    return ds;
}

namespace {

// Shared row kernel: y = (x - mu) * inv, inv = 1/sqrt(var + eps).
inline void ln_vec(const double* x, double* y, int d, double eps) {
    double mu = 0.0;
    for (int j = 0; j < d; ++j) mu += x[j];
    mu /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
        const double c = x[j] - mu;
        var += c * c;
    }
    var /= d;
    const double inv = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < d; ++j) y[j] = (x[j] - mu) * inv;
}

// dx = inv * (dy - mean(dy) - y * mean(dy .* y))
inline void ln_vec_backward(const double* x, const double* dy, double* dx, int d, double eps) {
    double mu = 0.0;
    for (int j = 0; j < d; ++j) mu += x[j];
    mu /= d;
    double var = 0.0;
    for (int j = 0; j < d; ++j) {
        const double c = x[j] - mu;
        var += c * c;
    }
    var /= d;
    const double inv = 1.0 / std::sqrt(var + eps);
    double mean_dy = 0.0, mean_dyy = 0.0;
    for (int j = 0; j < d; ++j) {
        const double yj = (x[j] - mu) * inv;
        mean_dy += dy[j];
        mean_dyy += dy[j] * yj;
    }
    mean_dy /= d;
    mean_dyy /= d;
    for (int j = 0; j < d; ++j) {
        const double yj = (x[j] - mu) * inv;
        dx[j] = inv * (dy[j] - mean_dy - yj * mean_dyy);
    }
}

}  // namespace

Tensor layer_norm_rows(const Tensor& x, double eps) {
    if (x.rank() != 2) fail_config("layer_norm_rows expects rank 2, got " + shape_str(x.shape()));
    if (x.numel() == 0) fail_config("layer_norm_rows: empty tensor");
    if (eps <= 0.0) fail_config("layer_norm_rows: eps must be > 0");
    const int n = x.dim(0), d = x.dim(1);
    Tensor y({n, d});
    for (int i = 0; i < n; ++i) {
        ln_vec(x.data() + static_cast<std::size_t>(i) * d, y.data() + static_cast<std::size_t>(i) * d,
               d, eps);
    }
    return y;
}

Tensor layer_norm_rows_backward(const Tensor& x, const Tensor& dy, double eps) {
    const int n = x.dim(0), d = x.dim(1);
    Tensor dx({n, d});
    for (int i = 0; i < n; ++i) {
        const std::size_t off = static_cast<std::size_t>(i) * d;
        ln_vec_backward(x.data() + off, dy.data() + off, dx.data() + off, d, eps);
    }
    return dx;
}

Tensor layer_norm_chw(const Tensor& x, double eps) {
    if (x.rank() != 3) fail_config("layer_norm_chw expects rank 3, got " + shape_str(x.shape()));
    if (x.numel() == 0) fail_config("layer_norm_chw: empty tensor");
    if (eps <= 0.0) fail_config("layer_norm_chw: eps must be > 0");
    const int d = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int hw = h * w;
    Tensor y({d, h, w});
    std::vector<double> col(static_cast<std::size_t>(d)), out(static_cast<std::size_t>(d));
    for (int p = 0; p < hw; ++p) {
        for (int c = 0; c < d; ++c) col[static_cast<std::size_t>(c)] = x[static_cast<std::size_t>(c) * hw + p];
        ln_vec(col.data(), out.data(), d, eps);
        for (int c = 0; c < d; ++c) y[static_cast<std::size_t>(c) * hw + p] = out[static_cast<std::size_t>(c)];
    }
    return y;
}

Tensor layer_norm_chw_backward(const Tensor& x, const Tensor& dy, double eps) {
    const int d = x.dim(0), h = x.dim(1), w = x.dim(2);
    const int hw = h * w;
    Tensor dx({d, h, w});
    std::vector<double> col(static_cast<std::size_t>(d)), dcol(static_cast<std::size_t>(d)),
        out(static_cast<std::size_t>(d));
    for (int p = 0; p < hw; ++p) {
        for (int c = 0; c < d; ++c) {
            col[static_cast<std::size_t>(c)] = x[static_cast<std::size_t>(c) * hw + p];
            dcol[static_cast<std::size_t>(c)] = dy[static_cast<std::size_t>(c) * hw + p];
        }
        ln_vec_backward(col.data(), dcol.data(), out.data(), d, eps);
        for (int c = 0; c < d; ++c) dx[static_cast<std::size_t>(c) * hw + p] = out[static_cast<std::size_t>(c)];
    }
    return dx;
}

namespace {

struct Lerp {
    int lo, hi;
    double w_hi;  // weight of hi sample; lo gets 1 - w_hi
};

inline Lerp lerp_coord(int out_i, int out_n, int in_n) {
    // align_corners = false source coordinate
    const double src = (out_i + 0.5) * static_cast<double>(in_n) / out_n - 0.5;
    if (src <= 0.0) return {0, 0, 0.0};
    if (src >= in_n - 1) return {in_n - 1, in_n - 1, 0.0};
    const int lo = static_cast<int>(src);
    return {lo, lo + 1, src - lo};
}

}  // namespace

Tensor bilinear_resize(const Tensor& x, int oh, int ow) {
    if (x.rank() != 3) fail_config("bilinear_resize expects rank 3, got " + shape_str(x.shape()));
    if (oh < 1 || ow < 1) fail_config("bilinear_resize: target dims must be >= 1");
    const int d = x.dim(0), ih = x.dim(1), iw = x.dim(2);
    if (ih < 1 || iw < 1) fail_config("bilinear_resize: source dims must be >= 1");
    if (oh == ih && ow == iw) return x;  // bitwise identity
    Tensor y({d, oh, ow});
    for (int oy = 0; oy < oh; ++oy) {
        const Lerp ly = lerp_coord(oy, oh, ih);
        for (int ox = 0; ox < ow; ++ox) {
            const Lerp lx = lerp_coord(ox, ow, iw);
            for (int c = 0; c < d; ++c) {
                const double v00 = x.at3(c, ly.lo, lx.lo);
                const double v01 = x.at3(c, ly.lo, lx.hi);
                const double v10 = x.at3(c, ly.hi, lx.lo);
                const double v11 = x.at3(c, ly.hi, lx.hi);
                const double top = v00 + (v01 - v00) * lx.w_hi;
                const double bot = v10 + (v11 - v10) * lx.w_hi;
                y.at3(c, oy, ox) = top + (bot - top) * ly.w_hi;
            }
        }
    }
    return y;
}

Tensor bilinear_resize_backward(const Tensor& dy, int ih, int iw) {
    const int d = dy.dim(0), oh = dy.dim(1), ow = dy.dim(2);
    if (oh == ih && ow == iw) return dy;
    Tensor dx({d, ih, iw});
    for (int oy = 0; oy < oh; ++oy) {
        const Lerp ly = lerp_coord(oy, oh, ih);
        for (int ox = 0; ox < ow; ++ox) {
            const Lerp lx = lerp_coord(ox, ow, iw);
            const double w00 = (1.0 - ly.w_hi) * (1.0 - lx.w_hi);
            const double w01 = (1.0 - ly.w_hi) * lx.w_hi;
            const double w10 = ly.w_hi * (1.0 - lx.w_hi);
            const double w11 = ly.w_hi * lx.w_hi;
            for (int c = 0; c < d; ++c) {
                const double g = dy.at3(c, oy, ox);
                dx.at3(c, ly.lo, lx.lo) += w00 * g;
                dx.at3(c, ly.lo, lx.hi) += w01 * g;
                dx.at3(c, ly.hi, lx.lo) += w10 * g;
                dx.at3(c, ly.hi, lx.hi) += w11 * g;
            }
        }
    }
    return dx;
}

Tensor mean_rows(const Tensor& x, int rows) {
    const int n = x.dim(0), d = x.dim(1);
    const int r = rows < 0 ? n : rows;
    if (r < 1 || r > n) fail_config("mean_rows: bad row count");
    Tensor m({d});
    for (int i = 0; i < r; ++i) {
        const double* xi = x.data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < d; ++j) m[static_cast<std::size_t>(j)] += xi[j];
    }
    const double inv = 1.0 / r;
    for (int j = 0; j < d; ++j) m[static_cast<std::size_t>(j)] *= inv;
    return m;
}

void mean_rows_backward(const Tensor& dmean, int n, int rows, Tensor& dx_acc) {
    const int d = static_cast<int>(dmean.numel());
    const int r = rows < 0 ? n : rows;
    const double inv = 1.0 / r;
    for (int i = 0; i < r; ++i) {
        double* dxi = dx_acc.data() + static_cast<std::size_t>(i) * d;
        for (int j = 0; j < d; ++j) dxi[j] += dmean[static_cast<std::size_t>(j)] * inv;
    }
}

Tensor l2_normalize(const Tensor& v) {
    const double norm = l2_norm(v);
    if (norm == 0.0) fail_numeric("l2_normalize: zero vector");
    Tensor y(v.shape());
    const double inv = 1.0 / norm;
    for (std::size_t i = 0; i < v.numel(); ++i) y[i] = v[i] * inv;
    return y;
}

Tensor l2_normalize_backward(const Tensor& v, const Tensor& dy) {
    const double norm = l2_norm(v);
    const double inv = 1.0 / norm;
    double dot = 0.0;
    for (std::size_t i = 0; i < v.numel(); ++i) dot += dy[i] * v[i] * inv;
    Tensor dv(v.shape());
    for (std::size_t i = 0; i < v.numel(); ++i) dv[i] = (dy[i] - v[i] * inv * dot) * inv;
    return dv;
}

}  // namespace spectra
