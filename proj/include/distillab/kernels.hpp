#pragma once

#include <cstddef>
#include <span>

namespace distillab::kernels {

// Dense kernels on row-major buffers. The functions in this namespace are
// OpenMP-parallel over output rows; every output element is accumulated by
// a single thread in a fixed order, so results do not depend on the thread
// count. `kernels::reference` holds the serial textbook versions used as
// test oracles and benchmark baselines.
//
// When `accumulate` is false the output is overwritten, otherwise added to.

// C[m×n] (+)= A[m×k] · B[k×n]
template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const T> a, std::span<const T> b,
             std::span<T> c, bool accumulate = false);

// C[m×n] (+)= A[m×k] · B[n×k]ᵀ
template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const T> a, std::span<const T> b,
             std::span<T> c, bool accumulate = false);

// C[m×n] (+)= A[k×m]ᵀ · B[k×n]
template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const T> a, std::span<const T> b,
             std::span<T> c, bool accumulate = false);

// Unfolds x[t_in×c_in] into patches[t_out×(c_in·k)] with column index
// c·k + j holding x[t·stride + j][c], matching a kernel laid out as
// [c_out×c_in×k].
template <typename T>
void im2col(std::size_t t_in, std::size_t c_in, std::size_t k, std::size_t stride, std::span<const T> x,
            std::span<T> patches);

// Adjoint of im2col: scatter-adds patch gradients back into dx.
template <typename T>
void col2im(std::size_t t_in, std::size_t c_in, std::size_t k, std::size_t stride, std::span<const T> patches,
            std::span<T> dx);

// Valid 1-D convolution y[t_out×c_out] = Σ x[t·s+j][c]·w[o][c][j] + bias[o].
template <typename T>
void conv1d(std::size_t t_in, std::size_t c_in, std::size_t c_out, std::size_t k, std::size_t stride,
            std::span<const T> x, std::span<const T> w, std::span<const T> bias, std::span<T> y);

void set_num_threads(int n);
int max_threads();

namespace reference {

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const T> a, std::span<const T> b,
             std::span<T> c, bool accumulate = false);

template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const T> a, std::span<const T> b,
             std::span<T> c, bool accumulate = false);

template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const T> a, std::span<const T> b,
             std::span<T> c, bool accumulate = false);

// Direct sliding-window convolution, no unfolding.
template <typename T>
void conv1d(std::size_t t_in, std::size_t c_in, std::size_t c_out, std::size_t k, std::size_t stride,
            std::span<const T> x, std::span<const T> w, std::span<const T> bias, std::span<T> y);

}  // namespace reference

}  // namespace distillab::kernels
