// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#include "sanrec/recsys/loss.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <string>

#include "sanrec/error.hpp"

namespace sanrec::recsys {
namespace {

void check_batch(const ad::Shape& shape, const DebiasedBatch& b) {
  if (b.rows() == 0) throw ContractError("loss: empty batch");
  if (b.popularity.size() != b.cols() || b.excluded.size() != b.rows() * b.cols()) {
    throw ContractError("loss: batch layout is inconsistent");
  }
  if (shape.rows != b.rows() || shape.cols != b.cols()) {
    throw ContractError("loss: logits " + shape.str() + " do not match batch [" +
                        std::to_string(b.rows()) + "x" + std::to_string(b.cols()) + "]");
  }
  for (std::size_t p : b.positive) {
    if (p >= b.cols()) throw ContractError("loss: positive column out of range");
  }
  for (double p : b.popularity) {
    if (!(p > 0.0) || !std::isfinite(p)) {
      throw DomainError("loss: popularity must be positive and finite, got " + std::to_string(p));
    }
  }
}

// Per-row softmax over the admitted candidates, in double. Returns the mean
// loss; fills `probs` (rows x cols, zero for excluded) when non-null.
template <typename T>
double evaluate(const ad::Tensor<T>& logits, const DebiasedBatch& b, std::vector<double>* probs) {
  check_batch(logits.shape(), b);
  for (T v : logits.data()) {
    if (!std::isfinite(static_cast<double>(v))) throw ContractError("loss: non-finite logit");
  }
  const std::size_t cols = b.cols();
  std::vector<std::size_t> order(cols);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return b.candidates[x] < b.candidates[y]; });
  std::vector<double> log_p(cols);
  for (std::size_t j = 0; j < cols; ++j) log_p[j] = std::log(b.popularity[j]);

  if (probs != nullptr) probs->assign(b.rows() * cols, 0.0);
  std::vector<double> z(cols);
  double total = 0.0;
  for (std::size_t r = 0; r < b.rows(); ++r) {
    double mx = -INFINITY;
    for (std::size_t j : order) {
      if (b.is_excluded(r, j)) continue;
      z[j] = static_cast<double>(logits(r, j)) - log_p[j];
      mx = std::max(mx, z[j]);
    }
    double sum = 0.0;
    for (std::size_t j : order) {
      if (!b.is_excluded(r, j)) sum += std::exp(z[j] - mx);
    }
    total += std::log(sum) + mx - z[b.positive[r]];
    if (probs != nullptr) {
      for (std::size_t j : order) {
        if (!b.is_excluded(r, j)) (*probs)[r * cols + j] = std::exp(z[j] - mx) / sum;
      }
    }
  }
  return total / static_cast<double>(b.rows());
}

}  // namespace

template <typename T>
double inbatch_debiased_ce_value(const ad::Tensor<T>& logits, const DebiasedBatch& batch) {
  return evaluate(logits, batch, nullptr);
}

template <typename T>
ad::Var<T> inbatch_debiased_ce(ad::Var<T> logits, const DebiasedBatch& batch) {
  auto probs = std::make_shared<std::vector<double>>();
  const double loss = evaluate(logits.value(), batch, probs.get());
  auto& tape = logits.tape();
  const std::size_t id = logits.id();
  const std::size_t rows = batch.rows();
  const std::size_t cols = batch.cols();
  std::vector<std::size_t> positive = batch.positive;
  return tape.record(ad::Tensor<T>::scalar(static_cast<T>(loss)), {logits},
                     [=](ad::Tape<T>& t, std::size_t self) {
                       const double g = static_cast<double>(t.grad(self)[0]);
                       auto& gl = t.grad_buffer(id);
                       const double inv = g / static_cast<double>(rows);
                       for (std::size_t r = 0; r < rows; ++r) {
                         for (std::size_t j = 0; j < cols; ++j) {
                           double d = (*probs)[r * cols + j];
                           if (j == positive[r]) d -= 1.0;
                           gl(r, j) += static_cast<T>(d * inv);
                         }
                       }
                     });
}

template ad::Var<float> inbatch_debiased_ce(ad::Var<float>, const DebiasedBatch&);
template ad::Var<double> inbatch_debiased_ce(ad::Var<double>, const DebiasedBatch&);
template double inbatch_debiased_ce_value(const ad::Tensor<float>&, const DebiasedBatch&);
template double inbatch_debiased_ce_value(const ad::Tensor<double>&, const DebiasedBatch&);

}  // namespace sanrec::recsys
