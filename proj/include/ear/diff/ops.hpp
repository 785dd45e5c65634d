#pragma once

#include <cstddef>
#include <vector>

#include "ear/common/rng.hpp"
#include "ear/diff/tensor.hpp"

namespace ear::diff {

enum class AttentionMode { causal, bidirectional };

// Every op checks shapes up front and throws DimensionError on mismatch.
// Reductions run sequentially in index order, so a forward pass is bitwise
// reproducible for fixed inputs.

/// [m x k] . [k x n] -> [m x n]
template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);

/// x[..., in] . w[in, out] + bias[out]. `bias` may be undefined.
template <class T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias);

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <class T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);

/// a * x + b elementwise, for scalar a and b.
template <class T>
Tensor<T> affine(const Tensor<T>& x, T a, T b);

template <class T>
Tensor<T> scale(const Tensor<T>& x, T s) {
  return affine(x, s, T(0));
}

/// (1 + scale) * x + tau * shift, all operands the same shape.
template <class T>
Tensor<T> modulate(const Tensor<T>& x, const Tensor<T>& scale, const Tensor<T>& shift, T tau);

template <class T>
Tensor<T> silu(const Tensor<T>& x);

/// tanh approximation of GELU.
template <class T>
Tensor<T> gelu(const Tensor<T>& x);

/// Normalizes each row over the trailing axis, then applies gamma/beta.
template <class T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps);

/// Inverted dropout; identity when p == 0.
template <class T>
Tensor<T> dropout(const Tensor<T>& x, double p, Rng& rng);

/// Multi-head scaled dot-product attention over `batch` independent
/// sequences. q, k, v are [batch * seq, d] with d divisible by `heads`.
/// Causal mode masks keys after the query position.
template <class T>
Tensor<T> attention(const Tensor<T>& q, const Tensor<T>& k, const Tensor<T>& v, std::size_t batch,
                    std::size_t heads, AttentionMode mode);

/// Selects rows of x viewed as [rows, cols]. Backward scatter-adds.
template <class T>
Tensor<T> gather_rows(const Tensor<T>& x, const std::vector<std::size_t>& index);

/// Stacks [r_i, c] tensors into [sum r_i, c].
template <class T>
Tensor<T> concat_rows(const std::vector<Tensor<T>>& parts);

/// Per-row Euclidean norm raised to alpha: [rows, cols] -> [rows].
/// At a zero row the gradient is zero for alpha >= 1 and NaN for alpha < 1,
/// where a|x|^(a-1) is unbounded; this matches differentiating the norm and
/// the power separately.
template <class T>
Tensor<T> row_norm_pow(const Tensor<T>& x, T alpha);

template <class T>
Tensor<T> sum(const Tensor<T>& x);
template <class T>
Tensor<T> mean(const Tensor<T>& x);

}  // namespace ear::diff
