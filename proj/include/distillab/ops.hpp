#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "distillab/autograd.hpp"

namespace distillab {

// Differentiable operations. Every op records its backward closure on the
// graph of its inputs; inputs must share one graph.

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> scale(const Var<T>& a, T factor);

// x[T×d] + bias[d] broadcast over rows.
template <typename T>
Var<T> add_row(const Var<T>& x, const Var<T>& bias);

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b);
// a[m×k] · b[n×k]ᵀ
template <typename T>
Var<T> matmul_nt(const Var<T>& a, const Var<T>& b);
template <typename T>
Var<T> transpose(const Var<T>& a);

// x[T×in] · weight[out×in]ᵀ + bias[out]
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias);

// Softmax along `axis` (negative counts from the back), max-subtracted.
template <typename T>
Var<T> softmax(const Var<T>& x, int axis = -1);

// Row-wise normalization of x[T×d] followed by gamma/beta affine.
template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps = T(1e-5));

// Exact (erf) GELU.
template <typename T>
Var<T> gelu(const Var<T>& x);

// Valid convolution: x[T×c_in], kernel[c_out×c_in×k] -> [T'×c_out],
// T' = floor((T-k)/stride) + 1.
template <typename T>
Var<T> conv1d(const Var<T>& x, const Var<T>& kernel, std::size_t stride);

template <typename T>
Var<T> slice_cols(const Var<T>& x, std::size_t begin, std::size_t count);
template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts);

template <typename T>
Var<T> sum(const Var<T>& x);
template <typename T>
Var<T> mean(const Var<T>& x);

// Rows of x[T×d] flagged in `rows` are replaced by `embedding`[d].
template <typename T>
Var<T> replace_rows(const Var<T>& x, std::span<const std::uint8_t> rows, const Var<T>& embedding);

// Columns of x[T×d] flagged in `cols` are set to zero.
template <typename T>
Var<T> zero_columns(const Var<T>& x, std::span<const std::uint8_t> cols);

}  // namespace distillab
