#include "distillab/ops.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "distillab/kernels.hpp"

namespace distillab {

namespace {

template <typename T>
Graph<T>& graph_of(const Var<T>& a, const Var<T>& b) {
  if (&a.graph() != &b.graph()) throw std::logic_error("operands belong to different graphs");
  return a.graph();
}

template <typename T>
void require_rank2(const Var<T>& x, const char* op) {
  if (x.value().rank() != 2) {
    throw DimensionError(std::string(op) + " expects a matrix, got shape " + shape_str(x.shape()));
  }
}

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
  }
}

template <typename T>
void add_into(Tensor<T>* dst, const Tensor<T>& src, T factor = T(1)) {
  if (!dst) return;
  T* d = dst->ptr();
  const T* s = src.ptr();
  const std::size_t n = src.size();
  for (std::size_t i = 0; i < n; ++i) d[i] += factor * s[i];
}

}  // namespace

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  Graph<T>& g = graph_of(a, b);
  require_same_shape(a, b, "add");
  Tensor<T> out = a.value();
  const Tensor<T>& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return g.record(std::move(out), {a, b}, [a, b](Graph<T>& gr, const Tensor<T>&, const Tensor<T>& dy) {
    add_into(gr.grad_target(a), dy);
    add_into(gr.grad_target(b), dy);
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  Graph<T>& g = graph_of(a, b);
  require_same_shape(a, b, "sub");
  Tensor<T> out = a.value();
  const Tensor<T>& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return g.record(std::move(out), {a, b}, [a, b](Graph<T>& gr, const Tensor<T>&, const Tensor<T>& dy) {
    add_into(gr.grad_target(a), dy);
    add_into(gr.grad_target(b), dy, T(-1));
  });
}

template <typename T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  Graph<T>& g = graph_of(a, b);
  require_same_shape(a, b, "mul");
  Tensor<T> out = a.value();
  const Tensor<T>& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return g.record(std::move(out), {a, b}, [a, b](Graph<T>& gr, const Tensor<T>&, const Tensor<T>& dy) {
    if (auto* ga = gr.grad_target(a)) {
      const Tensor<T>& bv = b.value();
      for (std::size_t i = 0; i < dy.size(); ++i) (*ga)[i] += dy[i] * bv[i];
    }
    if (auto* gb = gr.grad_target(b)) {
      const Tensor<T>& av = a.value();
      for (std::size_t i = 0; i < dy.size(); ++i) (*gb)[i] += dy[i] * av[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
  Tensor<T> out = a.value();
  for (auto& v : out.data()) v *= factor;
  return a.graph().record(std::move(out), {a}, [a, factor](Graph<T>& gr, const Tensor<T>&, const Tensor<T>& dy) {
    add_into(gr.grad_target(a), dy, factor);
  });
}

template <typename T>
Var<T> add_row(const Var<T>& x, const Var<T>& bias) {
  Graph<T>& g = graph_of(x, bias);
  require_rank2(x, "add_row");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (bias.value().size() != cols) {
    throw DimensionError("add_row: bias shape " + shape_str(bias.shape()) + " vs rows of " + shape_str(x.shape()));
  }
  Tensor<T> out = x.value();
  const Tensor<T>& bv = bias.value();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out(r, c) += bv[c];
  return g.record(std::move(out), {x, bias}, [x, bias, rows, cols](Graph<T>& gr, const Tensor<T>&, const Tensor<T>& dy) {
    add_into(gr.grad_target(x), dy);
    if (auto* gb = gr.grad_target(bias)) {
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) (*gb)[c] += dy(r, c);
    }
  });
}

template <typename T>
Var<T> matmul(const Var<T>& a, const Var<T>& b) {
  Graph<T>& g = graph_of(a, b);
  require_rank2(a, "matmul");
  require_rank2(b, "matmul");
  if (a.dim(1) != b.dim(0)) {
    throw DimensionError("matmul: inner extents differ for " + shape_str(a.shape()) + " · " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> out(Shape{m, n});
  kernels::gemm_nn<T>(m, n, k, a.value().data(), b.value().data(), out.data());
  return g.record(std::move(out), {a, b}, [a, b, m, n, k](Graph<T>& gr, const Tensor<T>&, const Tensor<T>& dy) {
    if (auto* ga = gr.grad_target(a)) kernels::gemm_nt<T>(m, k, n, dy.data(), b.value().data(), ga->data(), true);
    if (auto* gb = gr.grad_target(b)) kernels::gemm_tn<T>(k, n, m, a.value().data(), dy.data(), gb->data(), true);
  });
}

template <typename T>
Var<T> matmul_nt(const Var<T>& a, const Var<T>& b) {
  Graph<T>& g = graph_of(a, b);
  require_rank2(a, "matmul_nt");
  require_rank2(b, "matmul_nt");
  if (a.dim(1) != b.dim(1)) {
    throw DimensionError("matmul_nt: inner extents differ for " + shape_str(a.shape()) + " · " +
                         shape_str(b.shape()) + "ᵀ");
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  Tensor<T> out(Shape{m, n});
  kernels::gemm_nt<T>(m, n, k, a.value().data(), b.value().data(), out.data());
  return g.record(std::move(out), {a, b}, [a, b, m, n, k](Graph<T>& gr, const Tensor<T>&, const Tensor<T>& dy) {
    if (auto* ga = gr.grad_target(a)) kernels::gemm_nn<T>(m, k, n, dy.data(), b.value().data(), ga->data(), true);
    if (auto* gb = gr.grad_target(b)) kernels::gemm_tn<T>(n, k, m, dy.data(), a.value().data(), gb->data(), true);
  });
}

template <typename T>
Var<T> transpose(const Var<T>& a) {
  require_rank2(a, "transpose");
  const std::size_t r = a.dim(0), c = a.dim(1);
  Tensor<T> out(Shape{c, r});
  const Tensor<T>& av = a.value();
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out(j, i) = av(i, j);
  return a.graph().record(std::move(out), {a}, [a, r, c](Graph<T>& gr, const Tensor<T>&, const Tensor<T>& dy) {
    if (auto* ga = gr.grad_target(a)) {
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) (*ga)(i, j) += dy(j, i);
    }
  });
}

template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& weight, const Var<T>& bias) {
  Graph<T>& g = graph_of(x, weight);
  require_rank2(x, "linear");
  require_rank2(weight, "linear");
  const std::size_t rows = x.dim(0), in = x.dim(1), out_dim = weight.dim(0);
  if (weight.dim(1) != in || bias.value().size() != out_dim) {
    throw DimensionError("linear: input " + shape_str(x.shape()) + ", weight " + shape_str(weight.shape()) +
                         ", bias " + shape_str(bias.shape()));
  }
  Tensor<T> out(Shape{rows, out_dim});
  kernels::gemm_nt<T>(rows, out_dim, in, x.value().data(), weight.value().data(), out.data());
  const Tensor<T>& bv = bias.value();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < out_dim; ++c) out(r, c) += bv[c];
  return g.record(std::move(out), {x, weight, bias},
                  [x, weight, bias, rows, in, out_dim](Graph<T>& gr, const Tensor<T>&, const Tensor<T>& dy) {
                    if (auto* gx = gr.grad_target(x))
                      kernels::gemm_nn<T>(rows, in, out_dim, dy.data(), weight.value().data(), gx->data(), true);
                    if (auto* gw = gr.grad_target(weight))
                      kernels::gemm_tn<T>(out_dim, in, rows, dy.data(), x.value().data(), gw->data(), true);
                    if (auto* gb = gr.grad_target(bias)) {
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t c = 0; c < out_dim; ++c) (*gb)[c] += dy(r, c);
                    }
                  });
}

template <typename T>
Var<T> softmax(const Var<T>& x, int axis) {
  const Shape& shape = x.shape();
  const int rank = static_cast<int>(shape.size());
  const int ax = axis < 0 ? rank + axis : axis;
  if (ax < 0 || ax >= rank) throw DimensionError("softmax: axis " + std::to_string(axis) + " out of range for " + shape_str(shape));
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < ax; ++i) outer *= shape[i];
  for (int i = ax + 1; i < rank; ++i) inner *= shape[i];
  const std::size_t n = shape[ax];

  const Tensor<T>& xv = x.value();
  for (T v : xv.data()) {
    if (!std::isfinite(v)) throw NumericError("softmax: non-finite input");
  }
  Tensor<T> out(shape);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * n * inner + in;
      T mx = xv[base];
      for (std::size_t i = 1; i < n; ++i) mx = std::max(mx, xv[base + i * inner]);
      T total = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const T e = std::exp(xv[base + i * inner] - mx);
        out[base + i * inner] = e;
        total += e;
      }
      for (std::size_t i = 0; i < n; ++i) out[base + i * inner] /= total;
    }
  return x.graph().record(std::move(out), {x}, [x, outer, inner, n](Graph<T>& gr, const Tensor<T>& y, const Tensor<T>& dy) {
    auto* gx = gr.grad_target(x);
    if (!gx) return;
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t in = 0; in < inner; ++in) {
        const std::size_t base = o * n * inner + in;
        T dot = 0;
        for (std::size_t i = 0; i < n; ++i) dot += dy[base + i * inner] * y[base + i * inner];
        for (std::size_t i = 0; i < n; ++i) {
          const std::size_t idx = base + i * inner;
          (*gx)[idx] += y[idx] * (dy[idx] - dot);
        }
      }
  });
}

template <typename T>
Var<T> layer_norm(const Var<T>& x, const Var<T>& gamma, const Var<T>& beta, T eps) {
  Graph<T>& g = graph_of(x, gamma);
  require_rank2(x, "layer_norm");
  const std::size_t rows = x.dim(0), d = x.dim(1);
  if (gamma.value().size() != d || beta.value().size() != d) {
    throw DimensionError("layer_norm: input " + shape_str(x.shape()) + ", gamma " + shape_str(gamma.shape()) +
                         ", beta " + shape_str(beta.shape()));
  }
  const Tensor<T>& xv = x.value();
  const Tensor<T>& gv = gamma.value();
  const Tensor<T>& bv = beta.value();
  Tensor<T> xhat(x.shape());
  std::vector<T> rstd(rows);
  Tensor<T> out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    T mu = 0;
    for (std::size_t c = 0; c < d; ++c) mu += xv(r, c);
    mu /= static_cast<T>(d);
    T var = 0;
    for (std::size_t c = 0; c < d; ++c) {
      const T z = xv(r, c) - mu;
      var += z * z;
    }
    var /= static_cast<T>(d);
    rstd[r] = T(1) / std::sqrt(var + eps);
    for (std::size_t c = 0; c < d; ++c) {
      xhat(r, c) = (xv(r, c) - mu) * rstd[r];
      out(r, c) = gv[c] * xhat(r, c) + bv[c];
    }
  }
  return g.record(std::move(out), {x, gamma, beta},
                  [x, gamma, beta, rows, d, xhat = std::move(xhat), rstd = std::move(rstd)](
                      Graph<T>& gr, const Tensor<T>&, const Tensor<T>& dy) {
                    if (auto* gg = gr.grad_target(gamma))
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t c = 0; c < d; ++c) (*gg)[c] += dy(r, c) * xhat(r, c);
                    if (auto* gb = gr.grad_target(beta))
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t c = 0; c < d; ++c) (*gb)[c] += dy(r, c);
                    auto* gx = gr.grad_target(x);
                    if (!gx) return;
                    const Tensor<T>& gv = gamma.value();
                    std::vector<T> dxhat(d);
                    for (std::size_t r = 0; r < rows; ++r) {
                      T m1 = 0, m2 = 0;
                      for (std::size_t c = 0; c < d; ++c) {
                        dxhat[c] = dy(r, c) * gv[c];
                        m1 += dxhat[c];
                        m2 += dxhat[c] * xhat(r, c);
                      }
                      m1 /= static_cast<T>(d);
                      m2 /= static_cast<T>(d);
                      for (std::size_t c = 0; c < d; ++c) (*gx)(r, c) += rstd[r] * (dxhat[c] - m1 - xhat(r, c) * m2);
                    }
                  });
}

template <typename T>
Var<T> gelu(const Var<T>& x) {
  const Tensor<T>& xv = x.value();
  Tensor<T> out(x.shape());
  const T inv_sqrt2 = T(1) / std::numbers::sqrt2_v<T>;
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = T(0.5) * xv[i] * (T(1) + std::erf(xv[i] * inv_sqrt2));
  return x.graph().record(std::move(out), {x}, [x, inv_sqrt2](Graph<T>& gr, const Tensor<T>&, const Tensor<T>& dy) {
    auto* gx = gr.grad_target(x);
    if (!gx) return;
    const Tensor<T>& xv = x.value();
    const T inv_sqrt_2pi = std::numbers::inv_sqrtpi_v<T> * inv_sqrt2;
    for (std::size_t i = 0; i < xv.size(); ++i) {
      const T v = xv[i];
      const T cdf = T(0.5) * (T(1) + std::erf(v * inv_sqrt2));
      const T pdf = inv_sqrt_2pi * std::exp(T(-0.5) * v * v);
      (*gx)[i] += dy[i] * (cdf + v * pdf);
    }
  });
}

template <typename T>
Var<T> conv1d(const Var<T>& x, const Var<T>& kernel, std::size_t stride) {
  Graph<T>& g = graph_of(x, kernel);
  require_rank2(x, "conv1d");
  if (kernel.value().rank() != 3) throw DimensionError("conv1d: kernel must be [c_out×c_in×k], got " + shape_str(kernel.shape()));
  if (stride < 1) throw ArgumentError("conv1d: stride must be at least 1");
  const std::size_t t_in = x.dim(0), c_in = x.dim(1);
  const std::size_t c_out = kernel.dim(0), k = kernel.dim(2);
  if (kernel.dim(1) != c_in) {
    throw DimensionError("conv1d: input " + shape_str(x.shape()) + " has " + std::to_string(c_in) +
                         " channels but kernel " + shape_str(kernel.shape()) + " expects " + std::to_string(kernel.dim(1)));
  }
  if (t_in < k) {
    throw InputTooShortError("conv1d: input length T=" + std::to_string(t_in) + " is shorter than kernel k=" +
                             std::to_string(k));
  }
  const std::size_t t_out = (t_in - k) / stride + 1;
  const std::size_t width = c_in * k;
  std::vector<T> patches(t_out * width);
  kernels::im2col<T>(t_in, c_in, k, stride, x.value().data(), patches);
  Tensor<T> out(Shape{t_out, c_out});
  kernels::gemm_nt<T>(t_out, c_out, width, patches, kernel.value().data(), out.data());
  return g.record(std::move(out), {x, kernel},
                  [x, kernel, t_in, c_in, c_out, k, stride, t_out, width, patches = std::move(patches)](
                      Graph<T>& gr, const Tensor<T>&, const Tensor<T>& dy) {
                    if (auto* gk = gr.grad_target(kernel))
                      kernels::gemm_tn<T>(c_out, width, t_out, dy.data(), patches, gk->data(), true);
                    if (auto* gx = gr.grad_target(x)) {
                      std::vector<T> dpatches(t_out * width);
                      kernels::gemm_nn<T>(t_out, width, c_out, dy.data(), kernel.value().data(), dpatches, false);
                      kernels::col2im<T>(t_in, c_in, k, stride, dpatches, gx->data());
                    }
                  });
}

template <typename T>
Var<T> slice_cols(const Var<T>& x, std::size_t begin, std::size_t count) {
  require_rank2(x, "slice_cols");
  const std::size_t rows = x.dim(0), cols = x.dim(1);
  if (count == 0 || begin + count > cols) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(begin + count) +
                         ") outside " + shape_str(x.shape()));
  }
  Tensor<T> out(Shape{rows, count});
  const Tensor<T>& xv = x.value();
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < count; ++c) out(r, c) = xv(r, begin + c);
  return x.graph().record(std::move(out), {x}, [x, rows, begin, count](Graph<T>& gr, const Tensor<T>&, const Tensor<T>& dy) {
    if (auto* gx = gr.grad_target(x))
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < count; ++c) (*gx)(r, begin + c) += dy(r, c);
  });
}

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ArgumentError("concat_cols: no inputs");
  const std::size_t rows = parts.front().dim(0);
  std::size_t total = 0;
  for (const auto& p : parts) {
    require_rank2(p, "concat_cols");
    if (p.dim(0) != rows) throw DimensionError("concat_cols: row counts differ");
    if (&p.graph() != &parts.front().graph()) throw std::logic_error("concat_cols: inputs from different graphs");
    total += p.dim(1);
  }
  Tensor<T> out(Shape{rows, total});
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const Tensor<T>& pv = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < p.dim(1); ++c) out(r, offset + c) = pv(r, c);
    offset += p.dim(1);
  }
  return parts.front().graph().record(
      std::move(out), std::span<const Var<T>>(parts), [parts, rows](Graph<T>& gr, const Tensor<T>&, const Tensor<T>& dy) {
        std::size_t off = 0;
        for (const auto& p : parts) {
          const std::size_t w = p.dim(1);
          if (auto* gp = gr.grad_target(p))
            for (std::size_t r = 0; r < rows; ++r)
              for (std::size_t c = 0; c < w; ++c) (*gp)(r, c) += dy(r, off + c);
          off += w;
        }
      });
}

template <typename T>
Var<T> sum(const Var<T>& x) {
  T total = 0;
  for (T v : x.value().data()) total += v;
  return x.graph().record(Tensor<T>::scalar(total), {x}, [x](Graph<T>& gr, const Tensor<T>&, const Tensor<T>& dy) {
    if (auto* gx = gr.grad_target(x))
      for (auto& v : gx->data()) v += dy[0];
  });
}

template <typename T>
Var<T> mean(const Var<T>& x) {
  return scale(sum(x), T(1) / static_cast<T>(x.value().size()));
}

template <typename T>
Var<T> replace_rows(const Var<T>& x, std::span<const std::uint8_t> rows, const Var<T>& embedding) {
  Graph<T>& g = graph_of(x, embedding);
  require_rank2(x, "replace_rows");
  const std::size_t n = x.dim(0), d = x.dim(1);
  if (rows.size() != n || embedding.value().size() != d) {
    throw DimensionError("replace_rows: mask/embedding do not match " + shape_str(x.shape()));
  }
  Tensor<T> out = x.value();
  const Tensor<T>& ev = embedding.value();
  for (std::size_t r = 0; r < n; ++r)
    if (rows[r])
      for (std::size_t c = 0; c < d; ++c) out(r, c) = ev[c];
  std::vector<std::uint8_t> flags(rows.begin(), rows.end());
  return g.record(std::move(out), {x, embedding},
                  [x, embedding, n, d, flags = std::move(flags)](Graph<T>& gr, const Tensor<T>&, const Tensor<T>& dy) {
                    auto* gx = gr.grad_target(x);
                    auto* ge = gr.grad_target(embedding);
                    for (std::size_t r = 0; r < n; ++r)
                      for (std::size_t c = 0; c < d; ++c) {
                        if (flags[r]) {
                          if (ge) (*ge)[c] += dy(r, c);
                        } else if (gx) {
                          (*gx)(r, c) += dy(r, c);
                        }
                      }
                  });
}

template <typename T>
Var<T> zero_columns(const Var<T>& x, std::span<const std::uint8_t> cols) {
  require_rank2(x, "zero_columns");
  const std::size_t n = x.dim(0), d = x.dim(1);
  if (cols.size() != d) throw DimensionError("zero_columns: mask length does not match " + shape_str(x.shape()));
  Tensor<T> out = x.value();
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c)
      if (cols[c]) out(r, c) = T(0);
  std::vector<std::uint8_t> flags(cols.begin(), cols.end());
  return x.graph().record(std::move(out), {x}, [x, n, d, flags = std::move(flags)](Graph<T>& gr, const Tensor<T>&, const Tensor<T>& dy) {
    if (auto* gx = gr.grad_target(x))
      for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < d; ++c)
          if (!flags[c]) (*gx)(r, c) += dy(r, c);
  });
}

#define DISTILLAB_INSTANTIATE_OPS(T)                                                           \
  template Var<T> add(const Var<T>&, const Var<T>&);                                           \
  template Var<T> sub(const Var<T>&, const Var<T>&);                                           \
  template Var<T> mul(const Var<T>&, const Var<T>&);                                           \
  template Var<T> scale(const Var<T>&, T);                                                     \
  template Var<T> add_row(const Var<T>&, const Var<T>&);                                       \
  template Var<T> matmul(const Var<T>&, const Var<T>&);                                        \
  template Var<T> matmul_nt(const Var<T>&, const Var<T>&);                                     \
  template Var<T> transpose(const Var<T>&);                                                    \
  template Var<T> linear(const Var<T>&, const Var<T>&, const Var<T>&);                         \
  template Var<T> softmax(const Var<T>&, int);                                                 \
  template Var<T> layer_norm(const Var<T>&, const Var<T>&, const Var<T>&, T);                  \
  template Var<T> gelu(const Var<T>&);                                                         \
  template Var<T> conv1d(const Var<T>&, const Var<T>&, std::size_t);                           \
  template Var<T> slice_cols(const Var<T>&, std::size_t, std::size_t);                         \
  template Var<T> concat_cols(const std::vector<Var<T>>&);                                     \
  template Var<T> sum(const Var<T>&);                                                          \
  template Var<T> mean(const Var<T>&);                                                         \
  template Var<T> replace_rows(const Var<T>&, std::span<const std::uint8_t>, const Var<T>&);   \
  template Var<T> zero_columns(const Var<T>&, std::span<const std::uint8_t>);

DISTILLAB_INSTANTIATE_OPS(float)
DISTILLAB_INSTANTIATE_OPS(double)

#undef DISTILLAB_INSTANTIATE_OPS

}  // namespace distillab
