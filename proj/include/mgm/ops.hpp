#pragma once

#include <cstdint>
#include <vector>

#include "mgm/rng.hpp"
#include "mgm/tensor.hpp"

namespace mgm::nn {

// Elementwise; operands must have identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, float s);

// x: [m,n], bias: [n]; adds bias to every row.
Tensor add_bias_rows(const Tensor& x, const Tensor& bias);

// Rank-2 matrix product with optional transposes of either operand.
Tensor matmul(const Tensor& a, const Tensor& b, bool trans_a = false, bool trans_b = false);

// out.row(i) = table.row(rows[i]); gradient scatter-adds into the table.
Tensor gather_rows(const Tensor& table, const std::vector<int>& rows);

// Contiguous column window [start, start+len) of a rank-2 tensor.
Tensor slice_cols(const Tensor& x, int start, int len);

// Horizontal concatenation of rank-2 tensors with equal row counts.
Tensor concat_cols(const std::vector<Tensor>& parts);

// out.data[i] = idx[i] >= 0 ? x.data[idx[i]] : 0. The index map is the
// basis for im2col and nearest-neighbor upsampling; gradient scatter-adds.
Tensor gather_flat(const Tensor& x, std::vector<std::int64_t> idx, std::vector<int> out_shape);

// Softmax over the last dimension of logits/tau, max-subtracted.
Tensor softmax_with_temperature(const Tensor& logits, float tau);

// Per-row normalization over the last dimension, then affine by gain/bias.
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);

// tanh-approximation GELU, elementwise.
Tensor gelu(const Tensor& x);

// logits: [B,K]; mean over rows of -sum_k q_k log p_k with
// q = (1-eps)*onehot(target) + eps/K.
Tensor cross_entropy_label_smoothed(const Tensor& logits, const std::vector<int>& targets,
                                    float epsilon);

// Scalar sum of all elements (double accumulation).
Tensor sum(const Tensor& x);

// mean((a-b)^2), composed from primitives.
Tensor mean_squared_error(const Tensor& a, const Tensor& b);

// Inverted dropout; identity when !active or p == 0. Mask drawn from rng
// in element order.
Tensor dropout(const Tensor& x, float p, bool active, Rng& rng);

// Grad-less copy of the values (stop-gradient).
Tensor detach(const Tensor& x);

}  // namespace mgm::nn
