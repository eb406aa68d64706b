// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "core/tensor.hpp"

namespace scriptgen {
namespace ops {

// Builds an output tensor and, when recording is active and any parent
// participates in the graph, attaches the backward closure. Custom ops in
// other translation units (CTC, cross-entropy) use this too.
Tensor make_op_node(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                    std::function<void(TensorImpl&)> backward);

// Elementwise
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor neg(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor tanh_op(const Tensor& a);
Tensor gelu(const Tensor& a);

// out[r, :] = x[r, :] * s[r]  where s has x's shape minus the last axis.
Tensor scale_rows(const Tensor& x, const Tensor& s);

// Linear algebra. Matrices are dense row-major.
Tensor matmul(const Tensor& a, const Tensor& b);
// Batched matmul: a (N,p,q) x b (N,q,r) -> (N,p,r); trans_b flips b to (N,r,q).
Tensor bmm(const Tensor& a, const Tensor& b, bool trans_b = false);
// x (..., Din) with weight (Dout, Din), bias (Dout) -> (..., Dout)
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

// Shape manipulation (copying; gradients route through the index maps)
Tensor reshape(const Tensor& x, Shape new_shape);
Tensor concat_dim0(const std::vector<Tensor>& parts);
// Concatenate along the last axis; all other dims must agree.
Tensor concat_lastdim(const Tensor& a, const Tensor& b);
// x (T, rest...) -> (rest...) at index t
Tensor index_dim0(const Tensor& x, int64_t t);
// x (T, rest...) -> (len, rest...) from start
Tensor slice_dim0(const Tensor& x, int64_t start, int64_t len);
// (K, B, H*dh) -> (B*H, K, dh) and back
Tensor split_heads(const Tensor& x, int64_t num_heads);
Tensor merge_heads(const Tensor& x, int64_t num_heads);

// x (D) -> (1, n, D), each of the n rows a copy of x.
Tensor tile_row(const Tensor& x, int64_t n);
// x (T, B, D) + pos (T, D), broadcast over the middle axis.
Tensor add_pos_embed(const Tensor& x, const Tensor& pos);

// Reductions
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);
// (B,C,H,W) -> (B,C) spatial mean
Tensor global_mean_hw(const Tensor& x);

// Row-wise (last axis) normalizations
Tensor softmax_lastdim(const Tensor& x);
Tensor log_softmax_lastdim(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// Table (V, D), ids flattened row-major over id_shape -> (id_shape..., D)
Tensor embedding(const Tensor& table, const std::vector<int64_t>& ids, const Shape& id_shape);

// Convolution stack. x is NCHW; weight layouts are documented per op.
// conv2d weight: (Co, Ci*kh*kw), bias (Co)
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int64_t ci, int64_t co,
              int kh, int kw, int sh, int sw, int ph, int pw);
// conv_transpose2d weight: (Ci, Co*kh*kw), bias (Co)
Tensor conv_transpose2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int64_t ci,
                        int64_t co, int kh, int kw, int sh, int sw, int ph, int pw);
Tensor maxpool2d(const Tensor& x, int kh, int kw);
Tensor upsample_nearest2x(const Tensor& x);

Tensor dropout(const Tensor& x, double p, Rng& rng, bool training);

} // namespace ops
} // namespace scriptgen
