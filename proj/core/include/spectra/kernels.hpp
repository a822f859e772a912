#pragma once

#include "spectra/tensor.hpp"

namespace spectra {

// ---------------------------------------------------------------------------
// Raw matrix helpers (row-major buffers). C overwritten unless `_acc`.
// ---------------------------------------------------------------------------

/// C[m x n] = A[m x k] * B[k x n]
void mm(const double* a, int m, int k, const double* b, int n, double* c);
/// C[m x n] += A[m x k] * B[k x n]
void mm_acc(const double* a, int m, int k, const double* b, int n, double* c);
/// C[m x n] = A[m x k] * B[n x k]^T
void mm_bt(const double* a, int m, int k, const double* b, int n, double* c);
/// C[m x n] += A[k x m]^T * B[k x n]
void mm_at_acc(const double* a, int k, int m, const double* b, int n, double* c);

// ---------------------------------------------------------------------------
// Affine map. W is (out x in); rows of x are samples: y = x * W^T + b.
// ---------------------------------------------------------------------------

Tensor linear_forward(const Tensor& x, const Tensor& w, const Tensor& b);

/// Accumulates dW/db into the provided grad tensors and returns dX.
Tensor linear_backward(const Tensor& x, const Tensor& w, const Tensor& dy,
                       Tensor& dw_acc, Tensor& db_acc);

// ---------------------------------------------------------------------------
// Pointwise GELU (exact, erf form).
// ---------------------------------------------------------------------------

double gelu(double x);
double gelu_derivative(double x);
Tensor gelu_forward(const Tensor& x);
/// dx = dy .* gelu'(x)
Tensor gelu_backward(const Tensor& x, const Tensor& dy);

// ---------------------------------------------------------------------------
// Row-wise softmax over the last axis of an (n x m) tensor.
// ---------------------------------------------------------------------------

Tensor softmax_rows(const Tensor& s);
/// Given p = softmax(s) and dp, returns ds.
Tensor softmax_rows_backward(const Tensor& p, const Tensor& dp);

// ---------------------------------------------------------------------------
// Layer normalization (no affine part). Two layouts:
//   rows: (n x d), each row normalized across d
//   chw:  (d x h x w), each spatial position normalized across channels
// Population variance; y = (x - mean) / sqrt(var + eps).
// ---------------------------------------------------------------------------

Tensor layer_norm_rows(const Tensor& x, double eps);
Tensor layer_norm_rows_backward(const Tensor& x, const Tensor& dy, double eps);

Tensor layer_norm_chw(const Tensor& x, double eps);
Tensor layer_norm_chw_backward(const Tensor& x, const Tensor& dy, double eps);

// ---------------------------------------------------------------------------
// Bilinear interpolation of a (d x h x w) map to (d x oh x ow),
// align_corners = false. Identity when sizes match (bitwise).
// ---------------------------------------------------------------------------

Tensor bilinear_resize(const Tensor& x, int oh, int ow);
/// Adjoint: scatters dy back onto the source grid.
Tensor bilinear_resize_backward(const Tensor& dy, int ih, int iw);

// ---------------------------------------------------------------------------
// Row mean pooling and L2 normalization.
// ---------------------------------------------------------------------------

/// (n x d) -> (d): column means over the first `rows` rows (default all).
Tensor mean_rows(const Tensor& x, int rows = -1);
/// Spreads d(mean) back over the first `rows` rows of an (n x d) gradient.
void mean_rows_backward(const Tensor& dmean, int n, int rows, Tensor& dx_acc);

/// v / ||v|| for a rank-1 tensor.
Tensor l2_normalize(const Tensor& v);
/// Given the *input* v and upstream dy, returns dv.
Tensor l2_normalize_backward(const Tensor& v, const Tensor& dy);

}  // namespace spectra
