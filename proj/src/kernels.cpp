#include "distillab/kernels.hpp"

#include <algorithm>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace distillab::kernels {

namespace {

// Below this many multiply-adds a parallel region costs more than it saves.
constexpr std::size_t kParallelWork = 1 << 15;

}  // namespace

void set_num_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(std::max(1, n));
#else
  (void)n;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const T> a, std::span<const T> b,
             std::span<T> c, bool accumulate) {
  const T* A = a.data();
  const T* B = b.data();
  T* C = c.data();
  const bool parallel = m * n * k >= kParallelWork && m > 1;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(m); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    T* crow = C + i * n;
    if (!accumulate) std::fill(crow, crow + n, T(0));
    const T* arow = A + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = arow[p];
      const T* brow = B + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const T> a, std::span<const T> b,
             std::span<T> c, bool accumulate) {
  // Transposing B once turns the strided dot products into the
  // vectorizable row-update form of gemm_nn.
  std::vector<T> bt(k * n);
  const T* B = b.data();
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t p = 0; p < k; ++p) bt[p * n + j] = B[j * k + p];
  gemm_nn<T>(m, n, k, a, bt, c, accumulate);
}

template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const T> a, std::span<const T> b,
             std::span<T> c, bool accumulate) {
  const T* A = a.data();
  const T* B = b.data();
  T* C = c.data();
  const bool parallel = m * n * k >= kParallelWork && m > 1;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(m); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    T* crow = C + i * n;
    if (!accumulate) std::fill(crow, crow + n, T(0));
    for (std::size_t p = 0; p < k; ++p) {
      const T av = A[p * m + i];
      const T* brow = B + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

template <typename T>
void im2col(std::size_t t_in, std::size_t c_in, std::size_t k, std::size_t stride, std::span<const T> x,
            std::span<T> patches) {
  const std::size_t t_out = (t_in - k) / stride + 1;
  const std::size_t width = c_in * k;
  const T* X = x.data();
  T* P = patches.data();
  const bool parallel = t_out * width >= kParallelWork;
#pragma omp parallel for schedule(static) if (parallel)
  for (std::ptrdiff_t tt = 0; tt < static_cast<std::ptrdiff_t>(t_out); ++tt) {
    const auto t = static_cast<std::size_t>(tt);
    T* row = P + t * width;
    const T* base = X + t * stride * c_in;
    for (std::size_t j = 0; j < k; ++j) {
      const T* frame = base + j * c_in;
      for (std::size_t ch = 0; ch < c_in; ++ch) row[ch * k + j] = frame[ch];
    }
  }
}

template <typename T>
void col2im(std::size_t t_in, std::size_t c_in, std::size_t k, std::size_t stride, std::span<const T> patches,
            std::span<T> dx) {
  // Overlapping windows write the same input frame, so this stays serial
  // to keep the summation order fixed.
  const std::size_t t_out = (t_in - k) / stride + 1;
  const std::size_t width = c_in * k;
  const T* P = patches.data();
  T* D = dx.data();
  for (std::size_t t = 0; t < t_out; ++t) {
    const T* row = P + t * width;
    T* base = D + t * stride * c_in;
    for (std::size_t j = 0; j < k; ++j) {
      T* frame = base + j * c_in;
      for (std::size_t ch = 0; ch < c_in; ++ch) frame[ch] += row[ch * k + j];
    }
  }
}

template <typename T>
void conv1d(std::size_t t_in, std::size_t c_in, std::size_t c_out, std::size_t k, std::size_t stride,
            std::span<const T> x, std::span<const T> w, std::span<const T> bias, std::span<T> y) {
  const std::size_t t_out = (t_in - k) / stride + 1;
  std::vector<T> patches(t_out * c_in * k);
  im2col<T>(t_in, c_in, k, stride, x, patches);
  gemm_nt<T>(t_out, c_out, c_in * k, patches, w, y, false);
  if (!bias.empty()) {
    for (std::size_t t = 0; t < t_out; ++t)
      for (std::size_t o = 0; o < c_out; ++o) y[t * c_out + o] += bias[o];
  }
}

namespace reference {

template <typename T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, std::span<const T> a, std::span<const T> b,
             std::span<T> c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      T sum = accumulate ? c[i * n + j] : T(0);
      for (std::size_t p = 0; p < k; ++p) sum += a[i * k + p] * b[p * n + j];
      c[i * n + j] = sum;
    }
}

template <typename T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, std::span<const T> a, std::span<const T> b,
             std::span<T> c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      T sum = accumulate ? c[i * n + j] : T(0);
      for (std::size_t p = 0; p < k; ++p) sum += a[i * k + p] * b[j * k + p];
      c[i * n + j] = sum;
    }
}

template <typename T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, std::span<const T> a, std::span<const T> b,
             std::span<T> c, bool accumulate) {
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      T sum = accumulate ? c[i * n + j] : T(0);
      for (std::size_t p = 0; p < k; ++p) sum += a[p * m + i] * b[p * n + j];
      c[i * n + j] = sum;
    }
}

template <typename T>
void conv1d(std::size_t t_in, std::size_t c_in, std::size_t c_out, std::size_t k, std::size_t stride,
            std::span<const T> x, std::span<const T> w, std::span<const T> bias, std::span<T> y) {
  const std::size_t t_out = (t_in - k) / stride + 1;
  for (std::size_t t = 0; t < t_out; ++t)
    for (std::size_t o = 0; o < c_out; ++o) {
      T sum = 0;
      for (std::size_t ch = 0; ch < c_in; ++ch)
        for (std::size_t j = 0; j < k; ++j) sum += x[(t * stride + j) * c_in + ch] * w[(o * c_in + ch) * k + j];
      y[t * c_out + o] = sum + (bias.empty() ? T(0) : bias[o]);
    }
}

}  // namespace reference

#define DISTILLAB_INSTANTIATE_KERNELS(T)                                                                           \
  template void gemm_nn<T>(std::size_t, std::size_t, std::size_t, std::span<const T>, std::span<const T>,          \
                           std::span<T>, bool);                                                                    \
  template void gemm_nt<T>(std::size_t, std::size_t, std::size_t, std::span<const T>, std::span<const T>,          \
                           std::span<T>, bool);                                                                    \
  template void gemm_tn<T>(std::size_t, std::size_t, std::size_t, std::span<const T>, std::span<const T>,          \
                           std::span<T>, bool);                                                                    \
  template void im2col<T>(std::size_t, std::size_t, std::size_t, std::size_t, std::span<const T>, std::span<T>);   \
  template void col2im<T>(std::size_t, std::size_t, std::size_t, std::size_t, std::span<const T>, std::span<T>);   \
  template void conv1d<T>(std::size_t, std::size_t, std::size_t, std::size_t, std::size_t, std::span<const T>,     \
                          std::span<const T>, std::span<const T>, std::span<T>);                                   \
  template void reference::gemm_nn<T>(std::size_t, std::size_t, std::size_t, std::span<const T>,                   \
                                      std::span<const T>, std::span<T>, bool);                                     \
  template void reference::gemm_nt<T>(std::size_t, std::size_t, std::size_t, std::span<const T>,                  \
                                      std::span<const T>, std::span<T>, bool);                                     \
  template void reference::gemm_tn<T>(std::size_t, std::size_t, std::size_t, std::span<const T>,                  \
                                      std::span<const T>, std::span<T>, bool);                                     \
  template void reference::conv1d<T>(std::size_t, std::size_t, std::size_t, std::size_t, std::size_t,              \
                                     std::span<const T>, std::span<const T>, std::span<const T>, std::span<T>);

DISTILLAB_INSTANTIATE_KERNELS(float)
DISTILLAB_INSTANTIATE_KERNELS(double)

#undef DISTILLAB_INSTANTIATE_KERNELS

}  // namespace distillab::kernels
