// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "sanrec/ad/tape.hpp"
#include "sanrec/ad/tensor.hpp"
#include "sanrec/recsys/dataset.hpp"

namespace sanrec::recsys {

/// Layout of one loss batch. Rows are (user, position) terms, columns the
/// deduplicated in-batch candidate items.
struct DebiasedBatch {
  std::vector<ItemId> candidates;
  /// Popularity of each candidate; must be positive.
  std::vector<double> popularity;
  /// Column of each row's target item.
  std::vector<std::size_t> positive;
  /// rows x cols, 1 where the candidate is in the row user's history. The
  /// positive column is never excluded.
  std::vector<std::uint8_t> excluded;

  std::size_t rows() const noexcept { return positive.size(); }
  std::size_t cols() const noexcept { return candidates.size(); }
  bool is_excluded(std::size_t row, std::size_t col) const {
    return col != positive[row] && excluded[row * cols() + col] != 0;
  }
};

/// Mean over rows of -log(exp(y_pos - log p_pos) / D), where D sums
/// exp(y_j - log p_j) over the positive and every non-excluded candidate.
/// Evaluated in double with max subtraction, summing candidates in
/// ascending item id order. Throws ContractError on non-finite logits or a
/// malformed batch, DomainError on non-positive popularity.
template <typename T>
ad::Var<T> inbatch_debiased_ce(ad::Var<T> logits, const DebiasedBatch& batch);

/// Value of the same loss.
template <typename T>
double inbatch_debiased_ce_value(const ad::Tensor<T>& logits, const DebiasedBatch& batch);

}  // namespace sanrec::recsys
