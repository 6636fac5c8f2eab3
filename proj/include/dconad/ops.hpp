#pragma once

#include "dconad/tensor.hpp"

namespace dconad {

// Differentiable free functions over Tensor. Every function computes its
// value eagerly; when a Tape is active and an input participates, a backward
// rule is recorded. All 2-D shapes are (rows, cols) row-major.

Tensor add(const Tensor& a, const Tensor& b);   // same shape
Tensor sub(const Tensor& a, const Tensor& b);   // same shape
Tensor mul(const Tensor& a, const Tensor& b);   // elementwise, same shape
Tensor scale(const Tensor& a, double c);

Tensor matmul(const Tensor& a, const Tensor& b);  // (m,k)x(k,n) -> (m,n)
Tensor transpose(const Tensor& a);

// Adds a length-n row vector to every row of a (m,n) matrix.
Tensor add_rowvec(const Tensor& a, const Tensor& b);

Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor sigmoid(const Tensor& a);

// Row-wise softmax with per-row max subtraction. Rejects non-finite input.
Tensor softmax_rows(const Tensor& a);

// Row-wise layer normalization: each length-n row to mean 0 / variance 1
// (epsilon 1e-5 inside the square root), then gain (*) and bias (+).
Tensor layer_norm(const Tensor& a, const Tensor& gain, const Tensor& bias);

Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor take_rows(const Tensor& a, Index start, Index count);
Tensor take_cols(const Tensor& a, Index start, Index count);

// x:(m,p), w:(p,n), b:(n) -> x*w + b per row.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// Two stacked kernel-size-1 convolutions over the row axis, i.e. a
// per-row affine -> ReLU -> affine. w1:(d_in,d_hidden), w2:(d_hidden,d_out).
Tensor pointwise_feedforward(const Tensor& x, const Tensor& w1, const Tensor& b1,
                             const Tensor& w2, const Tensor& b2);

// out[i,j] = x[i]' * W[j] * y[i] + b[j] with x:(m,p), y:(m,q), w:(k,p,q), b:(k).
Tensor bilinear(const Tensor& x, const Tensor& y, const Tensor& w, const Tensor& b);

// Each row divided by its sum (sum clamped below at 1e-8).
Tensor row_normalize(const Tensor& a);

// Sum over rows i of KL(p[i] || q[i]) = sum_j p_ij*(log p_ij - log q_ij).
// Rows must be probability vectors (nonnegative, sum 1 within 1e-6); entries
// are clamped below at 1e-8 before the log. Returns a scalar.
Tensor kl_rows(const Tensor& p, const Tensor& q);

Tensor sum(const Tensor& a);

// Value-identical copy detached from the tape: gradients through it are zero.
Tensor stop_gradient(const Tensor& a);

namespace consts {
inline constexpr double kLayerNormEps = 1e-5;
inline constexpr double kLogClampEps = 1e-8;
inline constexpr double kRowSumEps = 1e-8;
}  // namespace consts

}  // namespace dconad
