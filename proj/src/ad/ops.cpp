// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#include "sanrec/ad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace sanrec::ad {
namespace {

template <typename T>
void require_same_tape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (&a.tape() != &b.tape()) {
    throw ContractError(std::string(op) + ": operands live on different tapes");
  }
}

// out += a * b   (a: m x k, b: k x n)
template <typename T>
void gemm_nn(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& out) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  for (std::size_t i = 0; i < m; ++i) {
    T* o = out.data().data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T av = a(i, p);
      const T* br = b.data().data() + p * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += av * br[j];
    }
  }
}

// out += a * b^T   (a: m x k, b: n x k)
template <typename T>
void gemm_nt(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& out) {
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  for (std::size_t i = 0; i < m; ++i) {
    const T* ar = a.data().data() + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const T* br = b.data().data() + j * k;
      T acc = T(0);
      for (std::size_t p = 0; p < k; ++p) acc += ar[p] * br[p];
      out(i, j) += acc;
    }
  }
}

// out += a^T * b   (a: k x m, b: k x n)
template <typename T>
void gemm_tn(const Tensor<T>& a, const Tensor<T>& b, Tensor<T>& out) {
  const std::size_t k = a.rows(), m = a.cols(), n = b.cols();
  for (std::size_t p = 0; p < k; ++p) {
    const T* ar = a.data().data() + p * m;
    const T* br = b.data().data() + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const T av = ar[i];
      T* o = out.data().data() + i * n;
      for (std::size_t j = 0; j < n; ++j) o[j] += av * br[j];
    }
  }
}

template <typename T>
void accumulate_into(Tape<T>& tape, const Var<T>& target, const Tensor<T>& g) {
  if (!target.requires_grad()) return;
  auto& buf = tape.grad_buffer(target.id());
  for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
}

// Adds an upstream gradient of `out_shape` to an operand that may have been
// broadcast from a scalar.
template <typename T>
void accumulate_broadcast(Tape<T>& tape, const Var<T>& target, const Tensor<T>& g) {
  if (!target.requires_grad()) return;
  auto& buf = tape.grad_buffer(target.id());
  if (buf.size() == g.size()) {
    for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i];
  } else {
    T s = T(0);
    for (std::size_t i = 0; i < g.size(); ++i) s += g[i];
    buf[0] += s;
  }
}

template <typename T>
Shape broadcast_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa == sb) return sa;
  if (sa.is_scalar()) return sb;
  if (sb.is_scalar()) return sa;
  throw DimensionError(std::string(op) + ": incompatible shapes " + sa.str() + " and " + sb.str());
}

template <typename T>
T at_broadcast(const Tensor<T>& t, std::size_t i) {
  return t.size() == 1 ? t[0] : t[i];
}

}  // namespace

template <typename T>
Var<T> matmul(Var<T> a, Var<T> b) {
  require_same_tape(a, b, "matmul");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner dimensions differ for " + av.shape().str() + " x " +
                         bv.shape().str());
  }
  Tensor<T> out(av.rows(), bv.cols());
  gemm_nn(av, bv, out);
  Tape<T>& tape = a.tape();
  tape.add_matmul_flops(2ULL * av.rows() * av.cols() * bv.cols());
  return tape.record(std::move(out), {a, b}, [a, b](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    if (a.requires_grad()) gemm_nt(g, b.value(), t.grad_buffer(a.id()));
    if (b.requires_grad()) gemm_tn(a.value(), g, t.grad_buffer(b.id()));
  });
}

template <typename T>
Var<T> transpose(Var<T> a) {
  const Tensor<T>& av = a.value();
  Tensor<T> out(av.cols(), av.rows());
  for (std::size_t i = 0; i < av.rows(); ++i)
    for (std::size_t j = 0; j < av.cols(); ++j) out(j, i) = av(i, j);
  return a.tape().record(std::move(out), {a}, [a](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    auto& buf = t.grad_buffer(a.id());
    for (std::size_t i = 0; i < buf.rows(); ++i)
      for (std::size_t j = 0; j < buf.cols(); ++j) buf(i, j) += g(j, i);
  });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  require_same_tape(a, b, "add");
  const Shape s = broadcast_shape(a, b, "add");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  Tensor<T> out(s.rows, s.cols);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = at_broadcast(av, i) + at_broadcast(bv, i);
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    accumulate_broadcast(t, a, g);
    accumulate_broadcast(t, b, g);
  });
}

template <typename T>
Var<T> sub(Var<T> a, Var<T> b) {
  require_same_tape(a, b, "sub");
  const Shape s = broadcast_shape(a, b, "sub");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  Tensor<T> out(s.rows, s.cols);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = at_broadcast(av, i) - at_broadcast(bv, i);
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    accumulate_broadcast(t, a, g);
    if (b.requires_grad()) {
      Tensor<T> neg = g;
      for (auto& v : neg.data()) v = -v;
      accumulate_broadcast(t, b, neg);
    }
  });
}

template <typename T>
Var<T> mul(Var<T> a, Var<T> b) {
  require_same_tape(a, b, "mul");
  const Shape s = broadcast_shape(a, b, "mul");
  const Tensor<T>& av = a.value();
  const Tensor<T>& bv = b.value();
  Tensor<T> out(s.rows, s.cols);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = at_broadcast(av, i) * at_broadcast(bv, i);
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    const Tensor<T>& av = a.value();
    const Tensor<T>& bv = b.value();
    if (a.requires_grad()) {
      Tensor<T> ga(g.rows(), g.cols());
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] = g[i] * at_broadcast(bv, i);
      accumulate_broadcast(t, a, ga);
    }
    if (b.requires_grad()) {
      Tensor<T> gb(g.rows(), g.cols());
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] = g[i] * at_broadcast(av, i);
      accumulate_broadcast(t, b, gb);
    }
  });
}

template <typename T>
Var<T> scale(Var<T> a, T alpha, T beta) {
  Tensor<T> out = a.value();
  for (auto& v : out.data()) v = alpha * v + beta;
  return a.tape().record(std::move(out), {a}, [a, alpha](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    auto& buf = t.grad_buffer(a.id());
    for (std::size_t i = 0; i < g.size(); ++i) buf[i] += alpha * g[i];
  });
}

template <typename T>
Var<T> sigmoid(Var<T> a) {
  Tensor<T> out = a.value();
  for (auto& v : out.data()) v = sigmoid_value(v);
  return a.tape().record(std::move(out), {a}, [a](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    const Tensor<T>& s = t.value(self);
    auto& buf = t.grad_buffer(a.id());
    for (std::size_t i = 0; i < g.size(); ++i) buf[i] += g[i] * s[i] * (T(1) - s[i]);
  });
}

template <typename T>
Var<T> gelu(Var<T> a) {
  Tensor<T> out = a.value();
  for (auto& v : out.data()) v = gelu_value(v);
  return a.tape().record(std::move(out), {a}, [a](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    const Tensor<T>& x = a.value();
    auto& buf = t.grad_buffer(a.id());
    const T c = T(kGeluSqrt2OverPi);
    const T k = T(kGeluCubic);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T xv = x[i];
      const T th = std::tanh(c * (xv + k * xv * xv * xv));
      const T d = T(0.5) * (T(1) + th) +
                  T(0.5) * xv * (T(1) - th * th) * c * (T(1) + T(3) * k * xv * xv);
      buf[i] += g[i] * d;
    }
  });
}

template <typename T>
Var<T> layernorm(Var<T> x, Var<T> gain, Var<T> offset) {
  require_same_tape(x, gain, "layernorm");
  require_same_tape(x, offset, "layernorm");
  const Tensor<T>& xv = x.value();
  const std::size_t rows = xv.rows(), n = xv.cols();
  if (gain.shape() != Shape{1, n} || offset.shape() != Shape{1, n}) {
    throw DimensionError("layernorm: gain/offset must be [1x" + std::to_string(n) + "], got " +
                         gain.shape().str() + " and " + offset.shape().str());
  }
  Tensor<T> xhat(rows, n);
  std::vector<T> inv_std(rows);
  Tensor<T> out(rows, n);
  const Tensor<T>& gv = gain.value();
  const Tensor<T>& ov = offset.value();
  for (std::size_t r = 0; r < rows; ++r) {
    T mean = T(0);
    for (std::size_t j = 0; j < n; ++j) mean += xv(r, j);
    mean /= T(n);
    T var = T(0);
    for (std::size_t j = 0; j < n; ++j) {
      const T d = xv(r, j) - mean;
      var += d * d;
    }
    var /= T(n);
    const T inv = T(1) / std::sqrt(var + T(kLayerNormEps));
    inv_std[r] = inv;
    for (std::size_t j = 0; j < n; ++j) {
      xhat(r, j) = (xv(r, j) - mean) * inv;
      out(r, j) = xhat(r, j) * gv[j] + ov[j];
    }
  }
  return x.tape().record(
      std::move(out), {x, gain, offset},
      [x, gain, offset, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape<T>& t,
                                                                             std::size_t self) {
        const Tensor<T>& g = t.grad(self);
        const std::size_t rows = g.rows(), n = g.cols();
        const Tensor<T>& gv = gain.value();
        if (gain.requires_grad()) {
          auto& gb = t.grad_buffer(gain.id());
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < n; ++j) gb[j] += g(r, j) * xhat(r, j);
        }
        if (offset.requires_grad()) {
          auto& ob = t.grad_buffer(offset.id());
          for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t j = 0; j < n; ++j) ob[j] += g(r, j);
        }
        if (x.requires_grad()) {
          auto& xb = t.grad_buffer(x.id());
          for (std::size_t r = 0; r < rows; ++r) {
            T sum_d = T(0), sum_dx = T(0);
            for (std::size_t j = 0; j < n; ++j) {
              const T d = g(r, j) * gv[j];
              sum_d += d;
              sum_dx += d * xhat(r, j);
            }
            for (std::size_t j = 0; j < n; ++j) {
              const T d = g(r, j) * gv[j];
              xb(r, j) += inv_std[r] / T(n) * (T(n) * d - sum_d - xhat(r, j) * sum_dx);
            }
          }
        }
      });
}

template <typename T>
Var<T> add_bias(Var<T> x, Var<T> bias) {
  require_same_tape(x, bias, "add_bias");
  const Tensor<T>& xv = x.value();
  const Tensor<T>& bv = bias.value();
  if (bv.shape() != Shape{1, xv.cols()}) {
    throw DimensionError("add_bias: bias " + bv.shape().str() + " does not fit input " +
                         xv.shape().str());
  }
  Tensor<T> out = xv;
  for (std::size_t r = 0; r < out.rows(); ++r)
    for (std::size_t j = 0; j < out.cols(); ++j) out(r, j) += bv[j];
  return x.tape().record(std::move(out), {x, bias}, [x, bias](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    accumulate_into(t, x, g);
    if (bias.requires_grad()) {
      auto& bb = t.grad_buffer(bias.id());
      for (std::size_t r = 0; r < g.rows(); ++r)
        for (std::size_t j = 0; j < g.cols(); ++j) bb[j] += g(r, j);
    }
  });
}

template <typename T>
Var<T> softmax_rows(Var<T> x, bool causal) {
  const Tensor<T>& xv = x.value();
  if (causal && xv.rows() > xv.cols()) {
    throw DimensionError("softmax_rows: causal mask needs cols >= rows, got " + xv.shape().str());
  }
  Tensor<T> out(xv.rows(), xv.cols());
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    const std::size_t limit = causal ? r + 1 : xv.cols();
    T mx = -std::numeric_limits<T>::infinity();
    for (std::size_t j = 0; j < limit; ++j) mx = std::max(mx, xv(r, j));
    T total = T(0);
    for (std::size_t j = 0; j < limit; ++j) {
      out(r, j) = std::exp(xv(r, j) - mx);
      total += out(r, j);
    }
    for (std::size_t j = 0; j < limit; ++j) out(r, j) /= total;
  }
  return x.tape().record(std::move(out), {x}, [x](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    const Tensor<T>& p = t.value(self);
    auto& buf = t.grad_buffer(x.id());
    for (std::size_t r = 0; r < g.rows(); ++r) {
      T dot = T(0);
      for (std::size_t j = 0; j < g.cols(); ++j) dot += p(r, j) * g(r, j);
      for (std::size_t j = 0; j < g.cols(); ++j) buf(r, j) += p(r, j) * (g(r, j) - dot);
    }
  });
}

template <typename T>
Var<T> slice_rows(Var<T> x, std::size_t start, std::size_t count) {
  const Tensor<T>& xv = x.value();
  if (start + count > xv.rows()) {
    throw DimensionError("slice_rows: rows [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") out of " + xv.shape().str());
  }
  Tensor<T> out(count, xv.cols());
  std::copy_n(xv.data().begin() + start * xv.cols(), count * xv.cols(), out.data().begin());
  return x.tape().record(std::move(out), {x}, [x, start](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    auto& buf = t.grad_buffer(x.id());
    const std::size_t off = start * g.cols();
    for (std::size_t i = 0; i < g.size(); ++i) buf[off + i] += g[i];
  });
}

template <typename T>
Var<T> slice_cols(Var<T> x, std::size_t start, std::size_t count) {
  const Tensor<T>& xv = x.value();
  if (start + count > xv.cols()) {
    throw DimensionError("slice_cols: cols [" + std::to_string(start) + ", " +
                         std::to_string(start + count) + ") out of " + xv.shape().str());
  }
  Tensor<T> out(xv.rows(), count);
  for (std::size_t r = 0; r < xv.rows(); ++r)
    for (std::size_t j = 0; j < count; ++j) out(r, j) = xv(r, start + j);
  return x.tape().record(std::move(out), {x}, [x, start](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    auto& buf = t.grad_buffer(x.id());
    for (std::size_t r = 0; r < g.rows(); ++r)
      for (std::size_t j = 0; j < g.cols(); ++j) buf(r, start + j) += g(r, j);
  });
}

template <typename T>
Var<T> concat_rows(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: no inputs");
  const std::size_t cols = parts.front().shape().cols;
  std::size_t rows = 0;
  for (const auto& p : parts) {
    require_same_tape(parts.front(), p, "concat_rows");
    if (p.shape().cols != cols) {
      throw DimensionError("concat_rows: column mismatch " + parts.front().shape().str() +
                           " vs " + p.shape().str());
    }
    rows += p.shape().rows;
  }
  Tensor<T> out(rows, cols);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const auto& v = p.value();
    std::copy(v.data().begin(), v.data().end(), out.data().begin() + off);
    off += v.size();
  }
  return parts.front().tape().record(std::move(out), parts, [parts](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    std::size_t off = 0;
    for (const auto& p : parts) {
      const std::size_t n = p.value().size();
      if (p.requires_grad()) {
        auto& buf = t.grad_buffer(p.id());
        for (std::size_t i = 0; i < n; ++i) buf[i] += g[off + i];
      }
      off += n;
    }
  });
}

template <typename T>
Var<T> concat_cols(const std::vector<Var<T>>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const std::size_t rows = parts.front().shape().rows;
  std::size_t cols = 0;
  for (const auto& p : parts) {
    require_same_tape(parts.front(), p, "concat_cols");
    if (p.shape().rows != rows) {
      throw DimensionError("concat_cols: row mismatch " + parts.front().shape().str() + " vs " +
                           p.shape().str());
    }
    cols += p.shape().cols;
  }
  Tensor<T> out(rows, cols);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const auto& v = p.value();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < v.cols(); ++j) out(r, off + j) = v(r, j);
    off += v.cols();
  }
  return parts.front().tape().record(std::move(out), parts, [parts](Tape<T>& t, std::size_t self) {
    const Tensor<T>& g = t.grad(self);
    std::size_t off = 0;
    for (const auto& p : parts) {
      const std::size_t c = p.shape().cols;
      if (p.requires_grad()) {
        auto& buf = t.grad_buffer(p.id());
        for (std::size_t r = 0; r < g.rows(); ++r)
          for (std::size_t j = 0; j < c; ++j) buf(r, j) += g(r, off + j);
      }
      off += c;
    }
  });
}

template <typename T>
Var<T> gather_rows(Var<T> table, std::span<const std::size_t> indices) {
  const Tensor<T>& tv = table.value();
  Tensor<T> out(indices.size(), tv.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] >= tv.rows()) {
      throw InputError("gather_rows: index " + std::to_string(indices[r]) + " out of range for " +
                       tv.shape().str());
    }
    std::copy_n(tv.data().begin() + indices[r] * tv.cols(), tv.cols(),
                out.data().begin() + r * tv.cols());
  }
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  return table.tape().record(std::move(out), {table},
                             [table, idx = std::move(idx)](Tape<T>& t, std::size_t self) {
                               const Tensor<T>& g = t.grad(self);
                               auto& buf = t.grad_buffer(table.id());
                               for (std::size_t r = 0; r < idx.size(); ++r)
                                 for (std::size_t j = 0; j < g.cols(); ++j)
                                   buf(idx[r], j) += g(r, j);
                             });
}

template <typename T>
Var<T> sum(Var<T> x) {
  T total = T(0);
  for (T v : x.value().data()) total += v;
  return x.tape().record(Tensor<T>::scalar(total), {x}, [x](Tape<T>& t, std::size_t self) {
    const T g = t.grad(self)[0];
    auto& buf = t.grad_buffer(x.id());
    for (auto& v : buf.data()) v += g;
  });
}

template <typename T>
Var<T> dropout(Var<T> x, double p, Rng& rng) {
  if (p < 0.0 || p >= 1.0) throw ConfigError("dropout: probability must be in [0, 1)");
  if (p == 0.0) return x;
  const Shape s = x.shape();
  Tensor<T> mask(s.rows, s.cols);
  const T keep_scale = T(1.0 / (1.0 - p));
  for (auto& m : mask.data()) m = rng.uniform() < p ? T(0) : keep_scale;
  return mul(x, x.tape().constant(std::move(mask)));
}

#define SANREC_INSTANTIATE_OPS(T)                                                   \
  template Var<T> matmul(Var<T>, Var<T>);                                            \
  template Var<T> transpose(Var<T>);                                                 \
  template Var<T> add(Var<T>, Var<T>);                                               \
  template Var<T> sub(Var<T>, Var<T>);                                               \
  template Var<T> mul(Var<T>, Var<T>);                                               \
  template Var<T> scale(Var<T>, T, T);                                               \
  template Var<T> sigmoid(Var<T>);                                                   \
  template Var<T> gelu(Var<T>);                                                      \
  template Var<T> layernorm(Var<T>, Var<T>, Var<T>);                                 \
  template Var<T> add_bias(Var<T>, Var<T>);                                          \
  template Var<T> softmax_rows(Var<T>, bool);                                        \
  template Var<T> slice_rows(Var<T>, std::size_t, std::size_t);                      \
  template Var<T> slice_cols(Var<T>, std::size_t, std::size_t);                      \
  template Var<T> concat_rows(const std::vector<Var<T>>&);                           \
  template Var<T> concat_cols(const std::vector<Var<T>>&);                           \
  template Var<T> gather_rows(Var<T>, std::span<const std::size_t>);                 \
  template Var<T> sum(Var<T>);                                                       \
  template Var<T> dropout(Var<T>, double, Rng&);

SANREC_INSTANTIATE_OPS(float)
SANREC_INSTANTIATE_OPS(double)

}  // namespace sanrec::ad
