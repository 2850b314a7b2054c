// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "sanrec/recsys/dataset.hpp"

namespace sanrec::recsys {

inline constexpr std::size_t kTopK = 10;

/// 1 + number of other items scoring at least as high as the target: ties
/// are broken against the target.
std::size_t pessimistic_rank(std::span<const double> scores, std::size_t target);

double hit_at(std::size_t rank, std::size_t k = kTopK);
/// 1 / log2(rank + 1) inside the cutoff, else 0.
double ndcg_at(std::size_t rank, std::size_t k = kTopK);

struct MetricReport {
  double hr10 = 0.0;
  double ndcg10 = 0.0;
  std::size_t users = 0;

  /// `METRICS hr10=<f> ndcg10=<f> users=<n>`
  std::string line() const;
};

class MetricAccumulator {
 public:
  void add(std::size_t rank);
  MetricReport report() const;

 private:
  double hits_ = 0.0;
  double ndcg_ = 0.0;
  std::size_t n_ = 0;
};

/// Ranks the catalog by training popularity, descending, with ties in
/// ascending item id order, and scores every user's test item. Throws
/// InputError if a test item is missing from the catalog.
MetricReport popularity_baseline(const Split& split, const Popularity& popularity);

}  // namespace sanrec::recsys
