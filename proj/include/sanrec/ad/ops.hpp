// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "sanrec/ad/tape.hpp"
#include "sanrec/rng.hpp"

namespace sanrec::ad {

// Differentiable operations. Broadcasting is limited to scalar-with-tensor
// and equal shapes; the one exception is add_bias, which adds a 1 x n row to
// every row of its input.

/// Constants of the tanh approximation:
///   gelu(x) = 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))
inline constexpr double kGeluSqrt2OverPi = 0.7978845608028654;
inline constexpr double kGeluCubic = 0.044715;
inline constexpr double kLayerNormEps = 1e-5;

template <typename T> Var<T> matmul(Var<T> a, Var<T> b);
template <typename T> Var<T> transpose(Var<T> a);
template <typename T> Var<T> add(Var<T> a, Var<T> b);
template <typename T> Var<T> sub(Var<T> a, Var<T> b);
template <typename T> Var<T> mul(Var<T> a, Var<T> b);
/// alpha * a + beta, elementwise.
template <typename T> Var<T> scale(Var<T> a, T alpha, T beta = T(0));
template <typename T> Var<T> sigmoid(Var<T> a);
template <typename T> Var<T> gelu(Var<T> a);
/// Normalizes each row, then applies gain and offset (both 1 x cols).
template <typename T> Var<T> layernorm(Var<T> x, Var<T> gain, Var<T> offset);
template <typename T> Var<T> add_bias(Var<T> x, Var<T> bias);
/// Row softmax. With `causal`, entry (i, j) is masked out for j > i.
template <typename T> Var<T> softmax_rows(Var<T> x, bool causal = false);
template <typename T> Var<T> slice_rows(Var<T> x, std::size_t start, std::size_t count);
template <typename T> Var<T> slice_cols(Var<T> x, std::size_t start, std::size_t count);
template <typename T> Var<T> concat_rows(const std::vector<Var<T>>& parts);
template <typename T> Var<T> concat_cols(const std::vector<Var<T>>& parts);
/// Embedding lookup: row r of the result is table row indices[r].
template <typename T> Var<T> gather_rows(Var<T> table, std::span<const std::size_t> indices);
template <typename T> Var<T> sum(Var<T> x);
/// Inverted dropout with a mask drawn from `rng`; identity when p == 0.
template <typename T> Var<T> dropout(Var<T> x, double p, Rng& rng);

/// x W + b.
template <typename T>
Var<T> linear(Var<T> x, Var<T> weight, Var<T> bias) {
  return add_bias(matmul(x, weight), bias);
}

/// Scalar helpers shared with test oracles.
template <typename T>
T gelu_value(T x) {
  const T inner = T(kGeluSqrt2OverPi) * (x + T(kGeluCubic) * x * x * x);
  return T(0.5) * x * (T(1) + std::tanh(inner));
}
template <typename T>
T sigmoid_value(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

}  // namespace sanrec::ad
