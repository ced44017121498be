#pragma once

#include <cstddef>
#include <vector>

#include "situ/numerics/tensor.hpp"

// Differentiable operations. Each op validates shapes, rejects non-finite
// results, and records a backward rule on the active tape when any input
// requires a gradient.
namespace situ::num {

// Elementwise, identical shapes.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor minimum(const Tensor& a, const Tensor& b);  // ties send the gradient to `a`
Tensor maximum(const Tensor& a, const Tensor& b);  // ties send the gradient to `a`

Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor neg(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor abs(const Tensor& a);
Tensor square(const Tensor& a);
Tensor softplus(const Tensor& a);

// 2-D broadcasting helpers.
Tensor add_row(const Tensor& a, const Tensor& row);       // [m x n] + [1 x n]
Tensor broadcast_row(const Tensor& row, std::size_t m);   // [1 x n] -> [m x n]
Tensor broadcast_col(const Tensor& col, std::size_t n);   // [m x 1] -> [m x n]
Tensor scale_rows(const Tensor& a, const std::vector<double>& factors);  // constant per-row factor

Tensor sum(const Tensor& a);   // -> [1]
Tensor mean(const Tensor& a);  // -> [1]
Tensor sum_rows(const Tensor& a);  // [m x n] -> [m x 1]
Tensor sum_cols(const Tensor& a);  // [m x n] -> [1 x n]

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

Tensor slice_rows(const Tensor& a, std::size_t begin, std::size_t end);
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t end);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor gather_rows(const Tensor& table, const std::vector<std::size_t>& indices);
// out[i] = a[i, index[i]], shape [m x 1].
Tensor pick(const Tensor& a, const std::vector<std::size_t>& index);

// Softmax along `axis` of a tensor of any rank, computed with max subtraction.
Tensor softmax(const Tensor& a, std::size_t axis);
Tensor log_softmax(const Tensor& a, std::size_t axis);
// Row-wise softmax over the last axis of [m x n] where only columns with
// keep[j] take part; excluded columns get probability exactly 0.
Tensor masked_softmax(const Tensor& a, const std::vector<bool>& keep);

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// Composites.
Tensor cross_entropy(const Tensor& logits, const std::vector<std::size_t>& targets);  // per-row [m x 1]
Tensor bce_with_logits(const Tensor& logits, const std::vector<double>& targets);      // per-element
// Rows scaled to unit length; all-zero rows stay zero (gradient zero).
Tensor l2_normalize_rows(const Tensor& a);
Tensor cosine_rows(const Tensor& a, const Tensor& b);  // [m x n],[m x n] -> [m x 1]

}  // namespace situ::num
